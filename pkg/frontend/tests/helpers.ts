/**
 * Test support: spawn a real pipeline service in mock mode, build a File
 * for the upload input, and invoke the CLI for cross-client comparisons.
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import path from "node:path";

/** 64x64 hand-drawn-style sketch (a mug), PNG. */
const SKETCH_PNG_B64 =
  "iVBORw0KGgoAAAANSUhEUgAAAEAAAABACAIAAAAlC+aJAAABSElEQVR4nO2a2xLCMAhEG8f//+X4kFGrvQwsC7QT9tkunGBSkrT13pc765GdgFUFkK0CyNaTa9dak/yMuPRVBfZ0MsDCEsl1+woUQLYKIFsFkK0CyFYBZMulF6I3PCdiVkCeN5GwUVpzOCF7dCvAOnWVFfzgv4/p4XcSsAnBAXvSHpjlhkxibvZrH2Au4asQ90wSdlMDjEHyOFEdntoi6AD8sh8CGBQAke9XeSz1X8j7OF7rLwWIHH5VRF0FYm5DVFFu306LALwXn63ky9EcFbiyCiBbBZCtAsiWCADr1C2SvzrnqMBHMUVw2dDEf5UjjAjuif3kuCeO70YlQjY0fkUA+nZwT+zBgO068GWUywC7IQCWk8BdWc4qZz2d3magTeIS9wO72Sya74Xyb2h+vDRTghWXCfA1PSahh3MBiNRk7fQFVQDZegFwy6JkDulXowAAAABJRU5ErkJggg==";

export function sketchBytes(): Uint8Array {
  return new Uint8Array(Buffer.from(SKETCH_PNG_B64, "base64"));
}

export function sketchFile(): File {
  return new File([sketchBytes()], "mug.png", { type: "image/png" });
}

/** Set the FileList of an <input type=file> (jsdom has no native setter). */
export function setInputFile(input: HTMLInputElement, file: File): void {
  Object.defineProperty(input, "files", {
    value: [file],
    configurable: true,
  });
}

export interface RunningService {
  baseUrl: string;
  dataDir: string;
  stop(): void;
}

/** Start `serve` on a fresh data dir and wait for /healthz. */
export async function startService(seed = 11): Promise<RunningService> {
  const dataDir = mkdtempSync(path.join(tmpdir(), "studio-ui-"));
  const port = 21000 + Math.floor(Math.random() * 20000);
  const baseUrl = `http://127.0.0.1:${port}`;
  const proc: ChildProcess = spawn(
    "python3",
    [
      "-m",
      "sketch2print.cli",
      "--data-dir",
      dataDir,
      "--seed",
      String(seed),
      "serve",
      "--host",
      "127.0.0.1",
      "--port",
      String(port),
    ],
    { stdio: "ignore" },
  );
  const deadline = Date.now() + 30_000;
  for (;;) {
    try {
      const response = await fetch(`${baseUrl}/healthz`);
      if (response.ok) {
        break;
      }
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      proc.kill();
      throw new Error("service did not become healthy in 30s");
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  return {
    baseUrl,
    dataDir,
    stop() {
      proc.kill();
    },
  };
}

/** Export a session's STL through the CLI and return the bytes. */
export function cliExportStl(dataDir: string, sessionId: string): Buffer {
  const out = path.join(dataDir, `cli-export-${sessionId}.stl`);
  const result = spawnSync(
    "python3",
    [
      "-m",
      "sketch2print.cli",
      "--data-dir",
      dataDir,
      "--json",
      "session",
      "export",
      sessionId,
      "--out",
      out,
    ],
    { encoding: "utf-8" },
  );
  if (result.status !== 0) {
    throw new Error(`cli export failed: ${result.stderr || result.stdout}`);
  }
  return readFileSync(out);
}

/** Wait until the wizard finishes its in-flight work (busy banner gone). */
export async function settled(root: HTMLElement, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    await new Promise((resolve) => setTimeout(resolve, 25));
    if (!root.querySelector(".job-status")) {
      return;
    }
    if (Date.now() > deadline) {
      throw new Error("wizard still busy after timeout");
    }
  }
}

export function click(root: HTMLElement, selector: string): void {
  const node = root.querySelector<HTMLElement>(selector);
  if (!node) {
    throw new Error(`no element matches ${selector}`);
  }
  node.dispatchEvent(new MouseEvent("click", { bubbles: true }));
}
