// Static file server for the built dashboard, proxying /api to the
// run service (default http://127.0.0.1:8000).
import { createServer, request as httpRequest } from "node:http";
import { readFile } from "node:fs/promises";
import { extname, join, normalize } from "node:path";
import { fileURLToPath } from "node:url";

const root = fileURLToPath(new URL(".", import.meta.url));
const port = Number(process.env.PORT ?? 5173);
const apiHost = process.env.API_HOST ?? "127.0.0.1";
const apiPort = Number(process.env.API_PORT ?? 8000);

const MIME = {
  ".html": "text/html",
  ".js": "text/javascript",
  ".css": "text/css",
  ".json": "application/json",
  ".map": "application/json",
};

createServer((req, res) => {
  if (req.url?.startsWith("/api/")) {
    const proxied = httpRequest(
      { host: apiHost, port: apiPort, path: req.url, method: req.method, headers: req.headers },
      (upstream) => {
        res.writeHead(upstream.statusCode ?? 502, upstream.headers);
        upstream.pipe(res);
      },
    );
    proxied.on("error", () => {
      res.writeHead(502);
      res.end("run service unreachable");
    });
    req.pipe(proxied);
    return;
  }
  const path = req.url === "/" ? "/index.html" : (req.url ?? "/index.html");
  const file = normalize(join(root, path));
  if (!file.startsWith(root)) {
    res.writeHead(403);
    res.end();
    return;
  }
  readFile(file)
    .then((data) => {
      res.writeHead(200, { "Content-Type": MIME[extname(file)] ?? "application/octet-stream" });
      res.end(data);
    })
    .catch(() => {
      res.writeHead(404);
      res.end("not found");
    });
}).listen(port, () => {
  console.log(`dashboard on http://127.0.0.1:${port} (api -> ${apiHost}:${apiPort})`);
});
