package inventory;

import java.io.File;
import java.io.IOException;
import java.nio.file.Files;
import javax.servlet.http.HttpServletRequest;
import javax.servlet.http.HttpServletResponse;

public class FileController {
    private final File baseDir;

    public FileController(File baseDir) throws IOException {
        this.baseDir = baseDir.getCanonicalFile();
    }

    public void download(HttpServletRequest req, HttpServletResponse resp) throws IOException {
        String name = req.getParameter("name");
        File target = new File(baseDir, name).getCanonicalFile();
        if (!target.getPath().startsWith(baseDir.getPath() + File.separator)) {
            resp.sendError(HttpServletResponse.SC_FORBIDDEN);
            return;
        }
        resp.setContentType("application/octet-stream");
        Files.copy(target.toPath(), resp.getOutputStream());
    }
}
