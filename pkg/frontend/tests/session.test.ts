import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Bridge, CondStore, EngineError, timingProbe } from "../src/index.js";
import { dropDir, scratchDir } from "./util.js";

const PLUS_INF = 2n ** 64n - 1n;

let bridge: Bridge;
let root: string;
let store: CondStore;

beforeAll(async () => {
  bridge = new Bridge();
  await bridge.ping();
  root = scratchDir();
  store = await CondStore.open(bridge, `${root}/db`, { create: true, sync: false });
});

afterAll(async () => {
  await store.close();
  await bridge.close();
  dropDir(root);
});

describe("the canonical session script", () => {
  it("creates structure, stores epochs, patches, tags, and reads back", async () => {
    await store.withUpdate(async (s) => {
      await s.createFolderSet("/calib", "calibration constants");
      await s.createFolder("/calib/pedestals", "mean:float64,width:float64", {
        description: "per-channel pedestals",
      });
    });

    await store.withUpdate(async (s) => {
      await s.storeObject("/calib/pedestals", 0, 1000, [100.5, 1.25]);
      await s.storeObject("/calib/pedestals", 1000, 2000, [101.0, 1.5]);
      await s.storeObject("/calib/pedestals", 2000, "+inf", [99.75, 1.0]);
    });
    await store.withUpdate(async (s) => {
      await s.storeObject("/calib/pedestals", 500, 1500, [100.25, 2.0]);
    });

    const got = await store.findObject("/calib/pedestals", 750);
    expect(got.values).toEqual([100.25, 2.0]);
    expect(got.seq).toBe(4);
    expect(got.effectiveSince).toBe(500n);
    expect(got.effectiveTill).toBe(1500n);
    expect(got.since).toBe(500n);
    expect(got.till).toBe(1500n);

    const sweep = await store.browseObjects("/calib/pedestals", 0, "+inf");
    expect(sweep.map((o) => o.values[0])).toEqual([100.5, 100.25, 101.0, 99.75]);
    expect(sweep.map((o) => o.effectiveSince)).toEqual([0n, 500n, 1500n, 2000n]);
    expect(sweep[3].effectiveTill).toBe(PLUS_INF);

    await store.tagHead("prod-1", ["/calib/pedestals"]);
    await store.withUpdate(async (s) => {
      await s.storeObject("/calib/pedestals", 0, "+inf", [0.5, 0.5]);
    });
    const tagged = await store.findObject("/calib/pedestals", 750, { tag: "prod-1" });
    expect(tagged.values).toEqual([100.25, 2.0]);
    const head = await store.findObject("/calib/pedestals", 750);
    expect(head.values).toEqual([0.5, 0.5]);
  });

  it("pins explicit sequences with tagAtSequence", async () => {
    const seq = await store.withUpdate((s) =>
      s.storeObject("/calib/pedestals", 3000, 4000, [7.5, 0.25]),
    );
    await store.withUpdate((s) => s.storeObject("/calib/pedestals", 3000, 4000, [8.5, 0.25]));
    await store.tagAtSequence("pin-1", [["/calib/pedestals", seq]]);
    const pinned = await store.findObject("/calib/pedestals", 3500, { tag: "pin-1" });
    expect(pinned.seq).toBe(seq);
    expect(pinned.values[0]).toBe(7.5);
    const tags = await store.listTags();
    expect(tags.map((t) => t.name)).toContain("pin-1");
  });

  it("streams tiny samples and reads the step function", async () => {
    await store.withUpdate(async (s) => {
      await s.createTinyFolder("/calib/temp", "float64");
      await s.tinyAppendMany("/calib/temp", [
        [10, 291.5],
        [20, 292.25],
        [30, 290.75],
      ]);
    });
    const reading = await store.tinyRead("/calib/temp", 25);
    expect(reading.at).toBe(20n);
    expect(reading.value).toBe(292.25);
    expect(reading.effectiveSince).toBe(20n);
    expect(reading.effectiveTill).toBe(30n);
    const scan = await store.tinyScan("/calib/temp", 15, "+inf");
    expect(scan).toEqual([
      [10n, 291.5],
      [20n, 292.25],
      [30n, 290.75],
    ]);
  });

  it("describes folders and lists the catalog", async () => {
    const info = await store.describeFolder("/calib/pedestals");
    expect(info.kind).toBe("folder");
    expect(info.schema).toBe("mean:float64,width:float64");
    expect(info.strategy).toBe("layered");
    expect(info.count).toBeGreaterThanOrEqual(5);
    const children = await store.listChildren("/");
    expect(children.map((c) => c.path)).toContain("/calib");
    const stats = await store.stats();
    expect(stats.commits).toBeGreaterThan(0);
  });
});

describe("session and error semantics", () => {
  it("aborts a script scope that throws, leaving no trace", async () => {
    await store.withUpdate((s) => s.createFolder("/scratch", "v:int64"));
    await expect(
      store.withUpdate(async (s) => {
        await s.storeObject("/scratch", 0, 100, [42]);
        throw new Error("script bailed");
      }),
    ).rejects.toThrow("script bailed");
    expect(await store.browseObjects("/scratch", 0, "+inf")).toEqual([]);
  });

  it("surfaces engine errors with their engine names", async () => {
    const missing = await store.findObject("/nowhere", 5).catch((e) => e);
    expect(missing).toBeInstanceOf(EngineError);
    expect(missing.name).toBe("NoSuchFolder");

    const empty = await store.findObject("/scratch", 5).catch((e) => e);
    expect(empty.name).toBe("NoValidObject");

    const badTime = await store.findObject("/scratch", "never").catch((e) => e);
    expect(badTime.name).toBe("InvalidArgument");

    const dupe = await store.createFolder("/scratch", "v:int64").catch((e) => e);
    expect(dupe.name).toBe("AlreadyExists");
  });

  it("rejects double commits of one session handle", async () => {
    const session = await store.startUpdate();
    await session.commit();
    const again = await session.commit().catch((e) => e);
    expect(again).toBeInstanceOf(EngineError);
  });
});

describe("timing probe", () => {
  it("reports non-negative statistics for a no-op", async () => {
    const got = await timingProbe(() => undefined, 50);
    expect(got.meanNs).toBeGreaterThanOrEqual(0);
    expect(got.p95Ns).toBeGreaterThanOrEqual(0);
    expect(got.samplesNs).toHaveLength(50);
  });

  it("rejects repeat counts that cannot be timed", async () => {
    for (const repeat of [0, -3, 2.5]) {
      const err = await timingProbe(() => undefined, repeat).catch((e) => e);
      expect(err).toBeInstanceOf(EngineError);
      expect(err.name).toBe("InvalidArgument");
    }
  });
});
