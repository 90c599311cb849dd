/**
 * Development server: serves the static frontend and proxies /api/* to a
 * running pipeline service so the browser talks same-origin (no CORS
 * setup needed on the service).
 *
 *   node dist/server.js --service http://127.0.0.1:8000 --port 5173
 */

import { readFile } from "node:fs/promises";
import http from "node:http";
import path from "node:path";
import { fileURLToPath } from "node:url";

const MIME: Record<string, string> = {
  ".html": "text/html; charset=utf-8",
  ".js": "text/javascript",
  ".map": "application/json",
  ".css": "text/css",
  ".png": "image/png",
  ".svg": "image/svg+xml",
};

function argValue(flag: string, fallback: string): string {
  const at = process.argv.indexOf(flag);
  return at >= 0 && process.argv[at + 1] ? process.argv[at + 1] : fallback;
}

const serviceBase = argValue("--service", "http://127.0.0.1:8000").replace(/\/$/, "");
const port = Number(argValue("--port", "5173"));
const rootDir = path.resolve(path.dirname(fileURLToPath(import.meta.url)), "..");

async function proxy(req: http.IncomingMessage, res: http.ServerResponse): Promise<void> {
  const target = serviceBase + (req.url ?? "").replace(/^\/api/, "");
  const chunks: Buffer[] = [];
  for await (const chunk of req) {
    chunks.push(chunk as Buffer);
  }
  const body = Buffer.concat(chunks);
  const upstream = await fetch(target, {
    method: req.method,
    headers: { "content-type": req.headers["content-type"] ?? "application/json" },
    body: body.length > 0 ? body : undefined,
  });
  const payload = Buffer.from(await upstream.arrayBuffer());
  const headers: Record<string, string> = {};
  for (const name of ["content-type", "content-disposition", "cache-control"]) {
    const value = upstream.headers.get(name);
    if (value) {
      headers[name] = value;
    }
  }
  res.writeHead(upstream.status, headers);
  res.end(payload);
}

async function serveStatic(urlPath: string, res: http.ServerResponse): Promise<void> {
  const rel = urlPath === "/" ? "index.html" : urlPath.replace(/^\//, "");
  const file = path.join(rootDir, rel);
  if (!file.startsWith(rootDir)) {
    res.writeHead(403).end();
    return;
  }
  try {
    const data = await readFile(file);
    res.writeHead(200, { "content-type": MIME[path.extname(file)] ?? "application/octet-stream" });
    res.end(data);
  } catch {
    res.writeHead(404, { "content-type": "text/plain" });
    res.end(`not found: ${rel}`);
  }
}

const server = http.createServer((req, res) => {
  const url = req.url ?? "/";
  const handler = url.startsWith("/api/") ? proxy(req, res) : serveStatic(url.split("?")[0], res);
  handler.catch((err) => {
    res.writeHead(502, { "content-type": "text/plain" });
    res.end(`proxy error: ${err}`);
  });
});

server.listen(port, "127.0.0.1", () => {
  console.log(`studio-ui at http://127.0.0.1:${port} (service: ${serviceBase})`);
});
