"""Benchmark harness: result plumbing and the oracle gate on timed folders."""

from __future__ import annotations

import pytest

from condstore.bench import (
    BenchResult,
    bench_browse,
    bench_find,
    bench_store,
    bench_tiny_append,
    bench_tiny_read,
    kernel_contrast,
    render_table,
)
from condstore.errors import OracleMismatch


def test_store_bench_reports_counts():
    for strategy in ("layered", "legacy"):
        got = bench_store("storeB", strategy, 300, backend="memory", seed=3)
        assert got.n == 300
        assert got.ops > 0
        assert got.mean_ns > 0
        assert got.p95_ns >= 0
        assert got.strategy == strategy


def test_store_bench_on_file_backend(tmp_path, monkeypatch):
    monkeypatch.setenv("TMPDIR", str(tmp_path))
    got = bench_store("storeA", "layered", 250, backend="file", seed=1)
    assert got.backend == "file"
    assert got.kind == "storeA"


def test_read_benches_run():
    find = bench_find(400, ops=100, backend="memory", seed=2)
    assert find.kind == "readA" and find.ops == 100
    browse = bench_browse(400, ops=50, backend="memory", seed=2)
    assert browse.kind == "readB" and browse.ops == 50


def test_tiny_benches_run(tmp_path, monkeypatch):
    monkeypatch.setenv("TMPDIR", str(tmp_path))
    result, per_sample = bench_tiny_append(2000, backend="file", seed=4)
    assert result.kind == "tiny-append"
    assert per_sample <= 24
    read = bench_tiny_read(2000, ops=200, backend="memory", seed=4)
    assert read.kind == "tiny-read"


def test_kernel_contrast_covers_available_kernels():
    rows = kernel_contrast(n=800, ops=12, seed=5)
    kernels_seen = [r.kernel for r in rows]
    assert "pure" in kernels_seen
    assert len(rows) == len(set(kernels_seen))


def test_broken_engine_answers_refuse_to_report(monkeypatch):
    from condstore import engine

    real = engine.Store.find_object

    def lying(self, path, at, tag=None, at_seq=None, session=None):
        got = real(self, path, at, tag=tag, at_seq=at_seq, session=session)
        object.__setattr__(got, "seq", got.seq + 1)
        return got

    monkeypatch.setattr(engine.Store, "find_object", lying)
    with pytest.raises(OracleMismatch):
        bench_store("storeB", "layered", 300, backend="memory", seed=6)


def test_render_table_shapes_output():
    rows = [
        bench_store("storeB", "legacy", 200, backend="memory", seed=7),
        bench_store("storeB", "legacy", 400, backend="memory", seed=7),
    ]
    text = render_table(rows)
    assert "storeB" in text
    assert "legacy" in text
    assert "x" in text  # the per-pair growth ratio line


def test_result_row_matches_header():
    got = bench_store("storeA", "layered", 150, backend="memory", seed=8)
    assert len(got.row().split(",")) == len(BenchResult.HEADER.split(","))
