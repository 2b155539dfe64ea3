"""Benchmark harness for the two store strategies and the read paths.

Workloads:

* storeA — the same interval stored over and over (pure supersession).
* storeB — overlapping intervals with monotonically increasing start times,
  the historical worst case for truncate-on-write: every store clips the
  previous open-ended row, the table grows by one row per op, and the
  full-table scan makes each op cost O(rows so far).
* readA — single-point finds against a storeB-shaped folder.
* readB — window browses against the same shape.
* tiny-append / tiny-read — the minimal-overhead scalar stream.

Per-op wall times come from perf_counter_ns around exactly one public call;
commits happen between batches and are not timed (bulk-load convention). The
harness cross-checks every populated folder against the brute-force oracle
before it starts timing reads and refuses to report numbers for a store that
answers wrongly, so a benchmark run is also a correctness run.
"""

from __future__ import annotations

import gc
import math
import random
import shutil
import statistics
import tempfile
import time
from dataclasses import dataclass

from .backends.filestore import FileBackend
from .backends.memory import MemoryBackend
from .engine import Store
from .errors import InvalidArgument, NoValidObject, OracleMismatch
from .model import PLUS_INF, parse_schema
from .oracle import FolderOracle, TinyOracle

__all__ = [
    "BenchResult",
    "bench_find",
    "bench_browse",
    "bench_store",
    "bench_tiny_append",
    "bench_tiny_read",
    "kernel_contrast",
    "render_table",
    "run_matrix",
]

_SCHEMA = parse_schema("v:float64,ch:int32")
_PROBES = 64  # spot checks per populated folder before timing


@dataclass
class BenchResult:
    kind: str
    strategy: str
    backend: str
    kernel: str
    n: int
    ops: int
    total_ns: int
    mean_ns: float
    p95_ns: int
    seed: int

    HEADER = "kind,strategy,backend,kernel,n,ops,total_ns,mean_ns,p95_ns,seed"

    def row(self) -> str:
        return (
            f"{self.kind},{self.strategy},{self.backend},{self.kernel},"
            f"{self.n},{self.ops},{self.total_ns},{self.mean_ns:.1f},{self.p95_ns},{self.seed}"
        )


class _Bench:
    """One store under test plus its scratch directory, if any."""

    def __init__(self, backend: str, kernel: str):
        self.backend = backend
        self.kernel = kernel
        self.root = None
        if backend == "file":
            self.root = tempfile.mkdtemp(prefix="condstore-bench-")
            self.store = Store(FileBackend(self.root, create=True, sync=False), kernel=kernel)
        elif backend == "memory":
            self.store = Store(MemoryBackend(), kernel=kernel)
        else:
            raise InvalidArgument(f"unknown bench backend {backend!r}")

    def close(self):
        self.store.close()
        if self.root is not None:
            shutil.rmtree(self.root, ignore_errors=True)

    def disk_bytes(self) -> int:
        if self.root is None:
            return 0
        import os

        total = 0
        for name in os.listdir(self.root):
            total += os.path.getsize(os.path.join(self.root, name))
        return total


def _timed_loop(fn, ops: int, warmup: int) -> list[int]:
    """Per-op nanoseconds for the non-warmup portion; gc held off while timing."""
    samples = []
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        for i in range(warmup + ops):
            t0 = time.perf_counter_ns()
            fn(i)
            dt = time.perf_counter_ns() - t0
            if i >= warmup:
                samples.append(dt)
    finally:
        if was_enabled:
            gc.enable()
    return samples


def _warmup_for(n: int) -> int:
    return 100 if n > 1000 else max(1, n // 10)


def _p95(samples) -> int:
    ordered = sorted(samples)
    return ordered[min(len(ordered) - 1, int(math.ceil(0.95 * len(ordered))) - 1)]


def _result(kind, strategy, bench, n, samples, seed) -> BenchResult:
    return BenchResult(
        kind=kind,
        strategy=strategy,
        backend=bench.backend,
        kernel=bench.store.kernel_name,
        n=n,
        ops=len(samples),
        total_ns=sum(samples),
        mean_ns=statistics.fmean(samples),
        p95_ns=_p95(samples),
        seed=seed,
    )


def _op_stream(kind: str, n: int, seed: int):
    """(since, till, values) per op; shapes match the workload glossary."""
    rng = random.Random(seed)
    if kind == "storeA":
        return [(0, 86400, (rng.uniform(-100, 100), i % 2**31)) for i in range(n)]
    if kind == "storeB":
        return [(16 * i, PLUS_INF, (rng.uniform(-100, 100), i % 2**31)) for i in range(n)]
    raise InvalidArgument(f"unknown store workload {kind!r}")


def _populate(bench: _Bench, kind: str, n: int, seed: int, batch: int, timed: bool):
    """Fill /bench/data with the workload; returns (samples_or_None, objects)."""
    store = bench.store
    with store.update() as up:
        up.create_folderset("/bench")
    strategy = bench.strategy  # set by caller
    with store.update() as up:
        up.create_folder("/bench/data", schema=_SCHEMA, strategy=strategy)
    ops = _op_stream(kind, n, seed)
    objects = []
    samples = [] if timed else None
    warmup = _warmup_for(n) if timed else 0
    done = 0
    was_enabled = gc.isenabled()
    if timed:
        gc.disable()
    try:
        while done < n:
            take = min(batch, n - done)
            with store.update() as up:
                for i in range(done, done + take):
                    since, till, values = ops[i]
                    if timed:
                        t0 = time.perf_counter_ns()
                        seq = up.store_object("/bench/data", since, till, values)
                        dt = time.perf_counter_ns() - t0
                        if i >= warmup:
                            samples.append(dt)
                    else:
                        seq = up.store_object("/bench/data", since, till, values)
                    objects.append((seq, since, till))
            done += take
    finally:
        if timed and was_enabled:
            gc.enable()
    return samples, objects


def _verify_folder(store: Store, objects, seed: int, probes: int = _PROBES):
    """Sampled winner cross-check against the oracle; OracleMismatch on any diff."""
    oracle = FolderOracle(objects)
    rng = random.Random(seed ^ 0x5EED)
    hi = 100
    finite = [till for _, _, till in objects if till < PLUS_INF]
    if finite:
        hi = max(finite) + 40
    if objects:
        hi = max(hi, max(since for _, since, _ in objects) + 40)
    ceiling = len(objects)
    for _ in range(probes):
        t = rng.randrange(0, hi)
        want = oracle.winner_at(t, ceiling)
        try:
            got = store.find_object("/bench/data", t).seq
        except NoValidObject:
            got = 0
        if got != want:
            raise OracleMismatch(
                f"find at t={t} returned seq {got}, oracle says {want}"
            )


def bench_store(
    kind: str,
    strategy: str,
    n: int,
    *,
    backend: str = "file",
    kernel: str = "auto",
    seed: int = 0,
    batch: int = 1000,
    verify: bool = True,
) -> BenchResult:
    """Time the per-object store path for one workload/strategy pair."""
    bench = _Bench(backend, kernel)
    bench.strategy = strategy
    try:
        samples, objects = _populate(bench, kind, n, seed, batch, timed=True)
        if verify:
            _verify_folder(bench.store, objects, seed)
        return _result(kind, strategy, bench, n, samples, seed)
    finally:
        bench.close()


def bench_find(
    n: int,
    *,
    ops: int = 2000,
    strategy: str = "layered",
    backend: str = "file",
    kernel: str = "auto",
    seed: int = 0,
    batch: int = 1000,
    verify: bool = True,
) -> BenchResult:
    """readA: random single-point finds against a storeB-shaped folder."""
    bench = _Bench(backend, kernel)
    bench.strategy = strategy
    try:
        _, objects = _populate(bench, "storeB", n, seed, batch, timed=False)
        if verify:
            _verify_folder(bench.store, objects, seed)
        store = bench.store
        rng = random.Random(seed + 1)
        hi = 16 * n + 40
        points = [rng.randrange(0, hi) for _ in range(_warmup_for(n) + ops)]

        def one(i):
            store.find_object("/bench/data", points[i])

        samples = _timed_loop(one, ops, _warmup_for(n))
        return _result("readA", strategy, bench, n, samples, seed)
    finally:
        bench.close()


def bench_browse(
    n: int,
    *,
    ops: int = 500,
    strategy: str = "layered",
    backend: str = "file",
    kernel: str = "auto",
    seed: int = 0,
    batch: int = 1000,
    verify: bool = True,
) -> BenchResult:
    """readB: window browses against a storeB-shaped folder."""
    bench = _Bench(backend, kernel)
    bench.strategy = strategy
    try:
        _, objects = _populate(bench, "storeB", n, seed, batch, timed=False)
        if verify:
            _verify_folder(bench.store, objects, seed)
        store = bench.store
        rng = random.Random(seed + 2)
        hi = 16 * n
        spans = []
        for _ in range(_warmup_for(n) + ops):
            lo = rng.randrange(0, hi)
            spans.append((lo, lo + rng.randrange(16, 16 * 50)))

        def one(i):
            lo, hi_ = spans[i]
            for _ in store.browse_objects("/bench/data", lo, hi_):
                pass

        samples = _timed_loop(one, ops, _warmup_for(n))
        return _result("readB", strategy, bench, n, samples, seed)
    finally:
        bench.close()


def bench_tiny_append(
    n: int,
    *,
    backend: str = "file",
    kernel: str = "auto",
    seed: int = 0,
    batch: int = 10000,
) -> tuple[BenchResult, float]:
    """(result, disk bytes per sample); appends are timed individually."""
    bench = _Bench(backend, kernel)
    try:
        store = bench.store
        with store.update() as up:
            up.create_tiny_folder("/dcs", value_kind="float64")
        base = bench.disk_bytes()
        rng = random.Random(seed)
        values = [rng.uniform(-50, 50) for _ in range(n)]
        samples = []
        warmup = _warmup_for(n)
        done = 0
        was_enabled = gc.isenabled()
        gc.disable()
        try:
            while done < n:
                take = min(batch, n - done)
                with store.update() as up:
                    for i in range(done, done + take):
                        t0 = time.perf_counter_ns()
                        up.tiny_append("/dcs", i, values[i])
                        dt = time.perf_counter_ns() - t0
                        if i >= warmup:
                            samples.append(dt)
                done += take
        finally:
            if was_enabled:
                gc.enable()
        per_sample = (bench.disk_bytes() - base) / n if bench.backend == "file" else 16.0
        result = _result("tiny-append", "tiny", bench, n, samples, seed)
        return result, per_sample
    finally:
        bench.close()


def bench_tiny_read(
    n: int,
    *,
    ops: int = 5000,
    backend: str = "file",
    kernel: str = "auto",
    seed: int = 0,
    verify: bool = True,
) -> BenchResult:
    """Random step-function probes over an n-sample stream."""
    bench = _Bench(backend, kernel)
    try:
        store = bench.store
        with store.update() as up:
            up.create_tiny_folder("/dcs", value_kind="int64")
        rng = random.Random(seed)
        stream = [(i * 3, rng.randrange(-(2**40), 2**40)) for i in range(n)]
        done = 0
        while done < n:
            take = min(10000, n - done)
            with store.update() as up:
                for ts, v in stream[done : done + take]:
                    up.tiny_append("/dcs", ts, v)
            done += take
        if verify:
            oracle = TinyOracle(stream)
            for _ in range(_PROBES):
                t = rng.randrange(0, 3 * n + 30)
                want = oracle.read(t)
                try:
                    got = store.tiny_read("/dcs", t)
                    got_t = (got.at, got.value, got.effective.since, got.effective.till)
                except NoValidObject:
                    got_t = None
                if got_t != want:
                    raise OracleMismatch(f"tiny read at {t}: {got_t} != oracle {want}")
        points = [rng.randrange(0, 3 * n) for _ in range(_warmup_for(n) + ops)]

        def one(i):
            store.tiny_read("/dcs", points[i])

        samples = _timed_loop(one, ops, _warmup_for(n))
        return _result("tiny-read", "tiny", bench, n, samples, seed)
    finally:
        bench.close()


def kernel_contrast(
    n: int = 20000,
    *,
    ops: int = 60,
    backend: str = "memory",
    seed: int = 0,
) -> list[BenchResult]:
    """Same ceiling-rotating find load on every available kernel.

    Rotating sequence ceilings defeat the tiling cache, so each op pays for a
    fresh tiling build; that is the hot path the compiled kernel accelerates.
    """
    from . import kernels

    out = []
    for kernel in kernels.available():
        bench = _Bench(backend, kernel)
        bench.strategy = "layered"
        try:
            _, objects = _populate(bench, "storeB", n, seed, 10000, timed=False)
            store = bench.store
            rng = random.Random(seed + 3)
            plan = [
                (rng.randrange(0, 16 * n), rng.randrange(max(1, n // 2), n + 1))
                for _ in range(10 + ops)
            ]

            def one(i):
                t, ceiling = plan[i]
                try:
                    store.find_object("/bench/data", t, at_seq=ceiling)
                except NoValidObject:
                    pass

            samples = _timed_loop(one, ops, 10)
            out.append(_result("kernel-find", "layered", bench, n, samples, seed))
        finally:
            bench.close()
    return out


def run_matrix(
    *,
    backend: str = "file",
    kernel: str = "auto",
    seed: int = 0,
    store_sizes=(1000, 10000),
    layered_sizes=(1000, 50000),
    read_sizes=(1000, 50000),
    tiny_sizes=(1000, 100000),
) -> list[BenchResult]:
    """The headline grid: both strategies' store paths plus the read paths."""
    results = []
    for n in store_sizes:
        results.append(bench_store("storeB", "legacy", n, backend=backend, kernel=kernel, seed=seed))
    for n in layered_sizes:
        results.append(bench_store("storeB", "layered", n, backend=backend, kernel=kernel, seed=seed))
    for n in store_sizes:
        results.append(bench_store("storeA", "legacy", n, backend=backend, kernel=kernel, seed=seed))
    for n in read_sizes:
        results.append(bench_find(n, backend=backend, kernel=kernel, seed=seed))
    for n in tiny_sizes:
        result, _ = bench_tiny_append(n, backend=backend, kernel=kernel, seed=seed)
        results.append(result)
    return results


def render_table(results) -> str:
    """Aligned text table with a mean-ratio note per (kind, strategy) group."""
    cols = ("kind", "strategy", "backend", "kernel", "n", "ops", "mean_ns", "p95_ns")
    rows = [
        (
            r.kind, r.strategy, r.backend, r.kernel,
            str(r.n), str(r.ops), f"{r.mean_ns:.0f}", str(r.p95_ns),
        )
        for r in results
    ]
    widths = [max(len(c), *(len(row[i]) for row in rows)) if rows else len(c)
              for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(widths[i]) for i, c in enumerate(cols))]
    lines.append("  ".join("-" * widths[i] for i in range(len(cols))))
    for row in rows:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(len(cols))))
    groups: dict[tuple, list[BenchResult]] = {}
    for r in results:
        groups.setdefault((r.kind, r.strategy), []).append(r)
    for (kind, strategy), rs in groups.items():
        if len(rs) >= 2:
            rs = sorted(rs, key=lambda r: r.n)
            lo, hi = rs[0], rs[-1]
            ratio = hi.mean_ns / lo.mean_ns if lo.mean_ns else float("inf")
            lines.append(
                f"{kind}/{strategy}: per-op mean x{ratio:.2f} from n={lo.n} to n={hi.n}"
            )
    return "\n".join(lines)
