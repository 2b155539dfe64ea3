import { spawnSync, type SpawnSyncReturns } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Deterministic PRNG so generated scripts are reproducible per seed. */
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

export function scratchDir(prefix = "condstore-ts-"): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export function dropDir(path: string): void {
  rmSync(path, { recursive: true, force: true });
}

/** Run the engine's command-line front end against a store directory. */
export function cli(
  storeRoot: string | null,
  args: string[],
  input?: string,
): SpawnSyncReturns<string> {
  const argv = ["-m", "condstore.cli"];
  if (storeRoot) argv.push("--store", storeRoot);
  argv.push(...args);
  return spawnSync("python3", argv, {
    encoding: "utf8",
    input,
    maxBuffer: 64 * 1024 * 1024,
  });
}
