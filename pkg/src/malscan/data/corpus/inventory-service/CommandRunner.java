package inventory;

import java.io.IOException;
import java.util.List;
import java.util.concurrent.TimeUnit;

public class CommandRunner {
    private static final List<String> ALLOWED = List.of("backup", "reindex");

    public int run(String task, String target) throws IOException, InterruptedException {
        if (!ALLOWED.contains(task)) {
            throw new IllegalArgumentException("unsupported task");
        }
        ProcessBuilder pb = new ProcessBuilder("/usr/local/bin/inventory-" + task, "--target", target);
        pb.redirectErrorStream(true);
        Process p = pb.start();
        if (!p.waitFor(60, TimeUnit.SECONDS)) {
            p.destroyForcibly();
            return -1;
        }
        return p.exitValue();
    }
}
