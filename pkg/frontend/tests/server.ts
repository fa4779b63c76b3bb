// ============================================
// REAL SERVICE HARNESS
// ============================================

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

export function makeWorkDir(): string {
  return mkdtempSync(join(tmpdir(), "review-ui-"));
}

export function writePairsCsv(dir: string, pairs: Array<[string, string, number]>): void {
  const lines = ["a,b,score"];
  for (const [a, b, score] of pairs) {
    lines.push(`${a},${b},${score}`);
  }
  writeFileSync(join(dir, "pairs.csv"), lines.join("\n") + "\n");
}

export function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        probe.close(() => reject(new Error("no port assigned")));
        return;
      }
      const port = address.port;
      probe.close(() => resolve(port));
    });
  });
}

export async function startService(dir: string, port: number): Promise<ChildProcess> {
  const proc = spawn(
    "dermaudit",
    [
      "serve",
      "--pairs",
      join(dir, "pairs.csv"),
      "--log",
      join(dir, "verdicts.tsv"),
      "--host",
      "127.0.0.1",
      "--port",
      String(port),
    ],
    { stdio: "ignore" },
  );
  const deadline = Date.now() + 30000;
  while (Date.now() < deadline) {
    if (proc.exitCode !== null) {
      throw new Error(`service exited early with code ${proc.exitCode}`);
    }
    try {
      const response = await fetch(`http://127.0.0.1:${port}/api/session`);
      if (response.ok) {
        return proc;
      }
    } catch {
      // not listening yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  proc.kill("SIGKILL");
  throw new Error("service did not come up in time");
}

export function stopService(proc: ChildProcess): Promise<void> {
  return new Promise((resolve) => {
    if (proc.exitCode !== null) {
      resolve();
      return;
    }
    proc.once("exit", () => resolve());
    proc.kill("SIGINT");
  });
}
