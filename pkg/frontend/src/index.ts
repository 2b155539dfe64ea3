/**
 * Scripting bindings for the condstore engine.
 *
 * A long-lived Python bridge process owns the open stores; this module
 * speaks JSON lines to it over stdio and surfaces engine errors as
 * catchable exceptions carrying the engine error name. Ticks are u64
 * values, so they cross the pipe as decimal strings and surface here as
 * bigint; the "-inf" / "+inf" literals are accepted wherever a tick goes in.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import { createInterface } from "node:readline";
import { dirname, resolve } from "node:path";
import type { Readable, Writable } from "node:stream";
import { fileURLToPath } from "node:url";

export class EngineError extends Error {
  constructor(name: string, message: string) {
    super(message);
    this.name = name;
  }
}

export type Tick = bigint | number | string;

function tickOut(t: Tick): string | number {
  // Safe integers ride as JSON numbers; everything else goes as a string
  // for the bridge to parse (including the -inf/+inf literals).
  if (typeof t === "number") {
    return Number.isSafeInteger(t) ? t : String(t);
  }
  if (typeof t === "bigint") {
    return t >= 0n && t <= 9007199254740991n ? Number(t) : t.toString();
  }
  return t;
}

export type AttrValue = number | string | boolean | AttrValue[];

export interface CondObject {
  folder: string;
  seq: number;
  since: bigint;
  till: bigint;
  effectiveSince: bigint;
  effectiveTill: bigint;
  values: AttrValue[];
}

export interface TinyReading {
  at: bigint;
  value: number;
  effectiveSince: bigint;
  effectiveTill: bigint;
}

export interface FolderInfo {
  path: string;
  kind: string;
  description: string;
  schema: string | null;
  strategy: string | null;
  policy: string | null;
  count: number;
  maxSeq: number;
}

export interface TagSnapshot {
  name: string;
  entries: Array<[string, number]>;
}

interface Reply {
  id: number;
  ok: boolean;
  result?: unknown;
  error?: string;
  message?: string;
}

interface Pending {
  resolve: (value: unknown) => void;
  reject: (err: Error) => void;
}

function objIn(raw: Record<string, unknown>): CondObject {
  return {
    folder: raw.folder as string,
    seq: raw.seq as number,
    since: BigInt(raw.since as string),
    till: BigInt(raw.till as string),
    effectiveSince: BigInt(raw.effective_since as string),
    effectiveTill: BigInt(raw.effective_till as string),
    values: raw.values as AttrValue[],
  };
}

/** One bridge process; stores and sessions are handles inside it. */
export class Bridge {
  private child: ChildProcessByStdio<Writable, Readable, null>;
  private pending = new Map<number, Pending>();
  private nextId = 1;
  private closed = false;

  constructor(pythonBin = "python3") {
    const here = dirname(fileURLToPath(import.meta.url));
    // src/ and dist/ both sit one level below the package root
    const script = resolve(here, "..", "bridge", "bridge.py");
    this.child = spawn(pythonBin, [script], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    const lines = createInterface({ input: this.child.stdout });
    lines.on("line", (line) => this.dispatch(line));
    this.child.on("exit", () => {
      this.closed = true;
      const err = new EngineError("BridgeClosed", "bridge process exited");
      for (const waiter of this.pending.values()) waiter.reject(err);
      this.pending.clear();
    });
  }

  private dispatch(line: string): void {
    const reply = JSON.parse(line) as Reply;
    const waiter = this.pending.get(reply.id);
    if (!waiter) return;
    this.pending.delete(reply.id);
    if (reply.ok) {
      waiter.resolve(reply.result);
    } else {
      waiter.reject(new EngineError(reply.error ?? "EngineError", reply.message ?? ""));
    }
  }

  request(op: string, args: Record<string, unknown> = {}): Promise<unknown> {
    if (this.closed) {
      return Promise.reject(new EngineError("BridgeClosed", "bridge process exited"));
    }
    const id = this.nextId++;
    const line = JSON.stringify({ id, op, ...args });
    return new Promise((resolvePromise, reject) => {
      this.pending.set(id, { resolve: resolvePromise, reject });
      this.child.stdin.write(line + "\n");
    });
  }

  async ping(): Promise<void> {
    await this.request("ping");
  }

  async close(): Promise<void> {
    if (this.closed) return;
    this.closed = true;
    this.child.stdin.end();
    await new Promise<void>((done) => this.child.once("exit", () => done()));
  }
}

export interface OpenOptions {
  backend?: "file" | "memory";
  mode?: "rw" | "ro";
  create?: boolean;
  kernel?: string;
  sync?: boolean;
}

export interface CreateFolderOptions {
  strategy?: "layered" | "legacy";
  partition?: string;
  description?: string;
}

export class UpdateSession {
  constructor(
    private bridge: Bridge,
    private handle: number,
  ) {}

  private get ref(): { session: number } {
    return { session: this.handle };
  }

  async createFolderSet(path: string, description = ""): Promise<void> {
    await this.bridge.request("create_folderset", { ...this.ref, path, description });
  }

  async createFolder(path: string, schema: string, opts: CreateFolderOptions = {}): Promise<void> {
    await this.bridge.request("create_folder", {
      ...this.ref,
      path,
      schema,
      strategy: opts.strategy ?? "layered",
      partition: opts.partition ?? null,
      description: opts.description ?? "",
    });
  }

  async createTinyFolder(
    path: string,
    kind: "float64" | "int64" = "float64",
    opts: { partition?: string; description?: string } = {},
  ): Promise<void> {
    await this.bridge.request("create_tiny_folder", {
      ...this.ref,
      path,
      kind,
      partition: opts.partition ?? null,
      description: opts.description ?? "",
    });
  }

  async storeObject(path: string, since: Tick, till: Tick, values: AttrValue[]): Promise<number> {
    const got = (await this.bridge.request("store_object", {
      ...this.ref,
      path,
      since: tickOut(since),
      till: tickOut(till),
      values,
    })) as { seq: number };
    return got.seq;
  }

  async storeMany(
    path: string,
    rows: Array<{ since: Tick; till: Tick; values: AttrValue[] }>,
  ): Promise<number[]> {
    const got = (await this.bridge.request("store_many", {
      ...this.ref,
      path,
      rows: rows.map((r) => [tickOut(r.since), tickOut(r.till), r.values]),
    })) as { seqs: number[] };
    return got.seqs;
  }

  async tinyAppend(path: string, at: Tick, value: number): Promise<void> {
    await this.bridge.request("tiny_append", { ...this.ref, path, at: tickOut(at), value });
  }

  async tinyAppendMany(path: string, samples: Array<[Tick, number]>): Promise<number> {
    const got = (await this.bridge.request("tiny_append_many", {
      ...this.ref,
      path,
      samples: samples.map(([at, v]) => [tickOut(at), v]),
    })) as { count: number };
    return got.count;
  }

  async commit(): Promise<void> {
    await this.bridge.request("commit", this.ref);
  }

  async abort(): Promise<void> {
    await this.bridge.request("abort", this.ref);
  }
}

export class CondStore {
  private constructor(
    private bridge: Bridge,
    private handle: number,
  ) {}

  static async open(bridge: Bridge, root: string | null, opts: OpenOptions = {}): Promise<CondStore> {
    const got = (await bridge.request("open", {
      root,
      backend: opts.backend ?? "file",
      mode: opts.mode ?? "rw",
      create: opts.create ?? false,
      kernel: opts.kernel ?? "auto",
      sync: opts.sync ?? true,
    })) as { store: number };
    return new CondStore(bridge, got.store);
  }

  private get ref(): { store: number } {
    return { store: this.handle };
  }

  async close(): Promise<void> {
    await this.bridge.request("close", this.ref);
  }

  async startUpdate(): Promise<UpdateSession> {
    const got = (await this.bridge.request("start_update", this.ref)) as { session: number };
    return new UpdateSession(this.bridge, got.session);
  }

  /** Run fn inside an update session: commit on success, abort on throw. */
  async withUpdate<T>(fn: (session: UpdateSession) => Promise<T>): Promise<T> {
    const session = await this.startUpdate();
    try {
      const out = await fn(session);
      await session.commit();
      return out;
    } catch (err) {
      await session.abort();
      throw err;
    }
  }

  async createFolderSet(path: string, description = ""): Promise<void> {
    await this.bridge.request("create_folderset", { ...this.ref, path, description });
  }

  async createFolder(path: string, schema: string, opts: CreateFolderOptions = {}): Promise<void> {
    await this.bridge.request("create_folder", {
      ...this.ref,
      path,
      schema,
      strategy: opts.strategy ?? "layered",
      partition: opts.partition ?? null,
      description: opts.description ?? "",
    });
  }

  async createTinyFolder(
    path: string,
    kind: "float64" | "int64" = "float64",
    opts: { partition?: string; description?: string } = {},
  ): Promise<void> {
    await this.bridge.request("create_tiny_folder", {
      ...this.ref,
      path,
      kind,
      partition: opts.partition ?? null,
      description: opts.description ?? "",
    });
  }

  async findObject(
    path: string,
    at: Tick,
    opts: { tag?: string; atSeq?: number } = {},
  ): Promise<CondObject> {
    const raw = await this.bridge.request("find_object", {
      ...this.ref,
      path,
      at: tickOut(at),
      tag: opts.tag ?? null,
      at_seq: opts.atSeq ?? null,
    });
    return objIn(raw as Record<string, unknown>);
  }

  async browseObjects(
    path: string,
    from: Tick,
    to: Tick,
    opts: { tag?: string; atSeq?: number } = {},
  ): Promise<CondObject[]> {
    const raw = (await this.bridge.request("browse_objects", {
      ...this.ref,
      path,
      from: tickOut(from),
      to: tickOut(to),
      tag: opts.tag ?? null,
      at_seq: opts.atSeq ?? null,
    })) as Array<Record<string, unknown>>;
    return raw.map(objIn);
  }

  async tagHead(name: string, paths: string[]): Promise<TagSnapshot> {
    return (await this.bridge.request("tag_head", { ...this.ref, name, paths })) as TagSnapshot;
  }

  async tagAtSequence(name: string, entries: Array<[string, number]>): Promise<TagSnapshot> {
    return (await this.bridge.request("tag_at_sequence", {
      ...this.ref,
      name,
      entries,
    })) as TagSnapshot;
  }

  async listTags(): Promise<TagSnapshot[]> {
    return (await this.bridge.request("list_tags", this.ref)) as TagSnapshot[];
  }

  async tinyRead(path: string, at: Tick): Promise<TinyReading> {
    const raw = (await this.bridge.request("tiny_read", {
      ...this.ref,
      path,
      at: tickOut(at),
    })) as Record<string, unknown>;
    return {
      at: BigInt(raw.at as string),
      value: raw.value as number,
      effectiveSince: BigInt(raw.effective_since as string),
      effectiveTill: BigInt(raw.effective_till as string),
    };
  }

  async tinyScan(path: string, from: Tick, to: Tick): Promise<Array<[bigint, number]>> {
    const raw = (await this.bridge.request("tiny_scan", {
      ...this.ref,
      path,
      from: tickOut(from),
      to: tickOut(to),
    })) as Array<[string, number]>;
    return raw.map(([ts, v]) => [BigInt(ts), v]);
  }

  async describeFolder(path: string): Promise<FolderInfo> {
    const raw = (await this.bridge.request("describe_folder", {
      ...this.ref,
      path,
    })) as Record<string, unknown>;
    return {
      path: raw.path as string,
      kind: raw.kind as string,
      description: raw.description as string,
      schema: raw.schema as string | null,
      strategy: raw.strategy as string | null,
      policy: raw.policy as string | null,
      count: raw.count as number,
      maxSeq: raw.max_seq as number,
    };
  }

  async listChildren(path = "/"): Promise<Array<{ path: string; kind: string }>> {
    return (await this.bridge.request("list_children", { ...this.ref, path })) as Array<{
      path: string;
      kind: string;
    }>;
  }

  async stats(): Promise<Record<string, number>> {
    return (await this.bridge.request("stats", this.ref)) as Record<string, number>;
  }
}

export interface TimingResult {
  meanNs: number;
  p95Ns: number;
  samplesNs: number[];
}

/** Wall-clock statistics over `repeat` awaited invocations of fn. */
export async function timingProbe(
  fn: () => unknown | Promise<unknown>,
  repeat: number,
): Promise<TimingResult> {
  if (!Number.isInteger(repeat) || repeat <= 0) {
    throw new EngineError("InvalidArgument", `repeat must be a positive integer, got ${repeat}`);
  }
  const samples: number[] = [];
  for (let i = 0; i < repeat; i++) {
    const t0 = process.hrtime.bigint();
    await fn();
    samples.push(Number(process.hrtime.bigint() - t0));
  }
  const ordered = [...samples].sort((a, b) => a - b);
  const p95Index = Math.min(ordered.length - 1, Math.ceil(0.95 * ordered.length) - 1);
  return {
    meanNs: samples.reduce((a, b) => a + b, 0) / samples.length,
    p95Ns: ordered[p95Index],
    samplesNs: samples,
  };
}
