/**
 * Test plumbing: spawn the real twin service, connect over the `ws`
 * package, and tear everything down without leaking processes.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import WebSocket from "ws";
import type { SocketFactory, SocketLike } from "../src/client.js";

export interface ServerHandle {
  port: number;
  url: string;
  logDir: string;
  proc: ChildProcess;
  stop(): Promise<number | null>;
}

export interface SceneOptions {
  standoff_mm?: number;
  insertion_depth_mm?: number;
  seed?: number;
  dt_s?: number;
  noise_sigma_mm?: number;
  time_scale?: number;
}

let nextPort = 18000 + (process.pid % 400) + Math.floor(Math.random() * 4000);

/**
 * Launch `teleop serve` with the given scene and wait until it prints its
 * listening line. Each call gets a fresh port and log directory.
 */
export async function startServer(
  scene: SceneOptions = {},
): Promise<ServerHandle> {
  const port = nextPort++;
  const dir = mkdtempSync(join(tmpdir(), "console-test-"));
  const scenePath = join(dir, "scene.yaml");
  const sceneLines = Object.entries(scene).map(([k, v]) => `${k}: ${v}`);
  writeFileSync(scenePath, sceneLines.join("\n") + "\n");

  const proc = spawn(
    "teleop",
    ["serve", "--port", String(port), "--scene", scenePath, "--log", dir],
    { stdio: ["ignore", "pipe", "pipe"] },
  );

  let stdout = "";
  let stderr = "";
  proc.stderr?.on("data", (chunk: Buffer) => {
    stderr += chunk.toString();
  });

  await new Promise<void>((resolve, reject) => {
    const timer = setTimeout(() => {
      proc.kill("SIGKILL");
      reject(new Error(`server did not come up: ${stderr}`));
    }, 20_000);
    proc.stdout?.on("data", (chunk: Buffer) => {
      stdout += chunk.toString();
      if (stdout.includes("listening on ws://")) {
        clearTimeout(timer);
        resolve();
      }
    });
    proc.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`server exited early (${code}): ${stderr}`));
    });
  });

  const stop = (): Promise<number | null> =>
    new Promise((resolve) => {
      if (proc.exitCode !== null) {
        resolve(proc.exitCode);
        return;
      }
      proc.on("exit", (code) => resolve(code));
      proc.kill("SIGTERM");
      setTimeout(() => proc.kill("SIGKILL"), 10_000).unref();
    });

  return { port, url: `ws://127.0.0.1:${port}`, logDir: dir, proc, stop };
}

/** Adapt the node `ws` client to the socket duck type the client wants. */
export const wsFactory: SocketFactory = (url) => {
  const sock = new WebSocket(url);
  const like: SocketLike = {
    onopen: null,
    onmessage: null,
    onclose: null,
    onerror: null,
    send: (data) => sock.send(data),
    close: () => sock.close(),
  };
  sock.on("open", () => like.onopen?.());
  sock.on("message", (data) => like.onmessage?.({ data: data.toString() }));
  sock.on("close", () => like.onclose?.());
  sock.on("error", () => like.onerror?.());
  return like;
};

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/** Poll until `cond` is true or the deadline passes. */
export async function waitFor(
  cond: () => boolean,
  timeoutMs: number,
  what = "condition",
  intervalMs = 10,
): Promise<void> {
  const t0 = Date.now();
  while (!cond()) {
    if (Date.now() - t0 > timeoutMs) {
      throw new Error(`timed out waiting for ${what}`);
    }
    await sleep(intervalMs);
  }
}

/** Deterministic 32-bit PRNG for scripted fuzzing. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}
