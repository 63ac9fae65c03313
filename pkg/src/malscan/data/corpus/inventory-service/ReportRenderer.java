package inventory;

import java.io.IOException;
import java.io.PrintWriter;
import java.util.List;
import javax.servlet.http.HttpServletRequest;
import javax.servlet.http.HttpServletResponse;

public class ReportRenderer {

    static String escapeHtml(String s) {
        StringBuilder out = new StringBuilder(s.length());
        for (char c : s.toCharArray()) {
            switch (c) {
                case '<': out.append("&lt;"); break;
                case '>': out.append("&gt;"); break;
                case '&': out.append("&amp;"); break;
                case '"': out.append("&quot;"); break;
                case '\'': out.append("&#x27;"); break;
                default: out.append(c);
            }
        }
        return out.toString();
    }

    public void render(HttpServletRequest req, HttpServletResponse resp, List<Item> items) throws IOException {
        String title = escapeHtml(req.getParameter("title"));
        resp.setContentType("text/html; charset=UTF-8");
        PrintWriter w = resp.getWriter();
        w.println("<h1>" + title + "</h1><ul>");
        for (Item item : items) {
            w.println("<li>" + escapeHtml(item.name()) + "</li>");
        }
        w.println("</ul>");
    }
}
