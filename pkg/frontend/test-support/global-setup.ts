// Spawns a real identification service on a synthetic corpus for the e2e
// suite; the info file tells tests where it listens and what to type.
import { spawn, type ChildProcess } from "node:child_process";
import { existsSync, mkdirSync, readFileSync, rmSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const here = dirname(fileURLToPath(import.meta.url));
export const INFO_PATH = join(here, ".service-info.json");

let child: ChildProcess | null = null;

async function waitForReady(timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (existsSync(INFO_PATH)) {
      const info = JSON.parse(readFileSync(INFO_PATH, "utf-8"));
      try {
        const res = await fetch(`${info.base_url}/api/health`);
        if (res.ok && (await res.json()).status === "ready") return;
      } catch {
        // not listening yet
      }
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("test service did not become ready in time");
}

export async function setup(): Promise<void> {
  rmSync(INFO_PATH, { force: true });
  mkdirSync(here, { recursive: true });
  child = spawn(
    "python3",
    [join(here, "start_service.py"), "--info-out", INFO_PATH],
    { stdio: ["ignore", "inherit", "inherit"] },
  );
  child.on("exit", (code) => {
    if (code !== null && code !== 0) {
      console.error(`test service exited with code ${code}`);
    }
  });
  await waitForReady(120_000);
}

export async function teardown(): Promise<void> {
  if (child && !child.killed) {
    child.kill("SIGTERM");
  }
  rmSync(INFO_PATH, { force: true });
}
