"""Tiny scalar streams: step-function reads, ordering, persistence, layout."""

from __future__ import annotations

import os
import random

import pytest

from condstore import MINUS_INF, PLUS_INF, make_schema, open_store
from condstore.errors import (
    InvalidArgument,
    NoSuchFolder,
    NoValidObject,
    OutOfOrder,
    SchemaMismatch,
)
from condstore.oracle import TinyOracle


def stream(store, path, samples, value_kind="float64"):
    with store.update() as up:
        up.create_tiny_folder(path, value_kind=value_kind)
        for ts, v in samples:
            up.tiny_append(path, ts, v)


def test_read_is_a_step_function(mem):
    stream(mem, "/t", [(10, 1.0), (20, 2.0), (40, 3.0)])
    got = mem.tiny_read("/t", 25)
    assert (got.at, got.value) == (20, 2.0)
    assert (got.effective.since, got.effective.till) == (20, 40)
    last = mem.tiny_read("/t", 10**12)
    assert last.value == 3.0
    assert last.effective.till == PLUS_INF


def test_read_exactly_on_a_sample(mem):
    stream(mem, "/t", [(10, 1.0), (20, 2.0)])
    got = mem.tiny_read("/t", 20)
    assert (got.at, got.value) == (20, 2.0)


def test_read_before_the_first_sample(mem):
    stream(mem, "/t", [(10, 1.0)])
    with pytest.raises(NoValidObject):
        mem.tiny_read("/t", 9)
    with pytest.raises(NoValidObject):
        mem.tiny_read("/t", 0)


def test_empty_stream_has_no_answer(mem):
    stream(mem, "/t", [])
    with pytest.raises(NoValidObject):
        mem.tiny_read("/t", 5)
    assert list(mem.tiny_scan("/t", MINUS_INF, PLUS_INF)) == []


def test_sample_at_tick_zero(mem):
    stream(mem, "/t", [(0, 9.0)])
    assert mem.tiny_read("/t", 0).value == 9.0


def test_scan_includes_the_straddling_sample(mem):
    stream(mem, "/t", [(10, 1.0), (20, 2.0), (40, 3.0)])
    assert list(mem.tiny_scan("/t", 15, 45)) == [(10, 1.0), (20, 2.0), (40, 3.0)]
    assert list(mem.tiny_scan("/t", 20, 40)) == [(20, 2.0)]
    assert list(mem.tiny_scan("/t", 41, 99)) == [(40, 3.0)]
    assert list(mem.tiny_scan("/t", 0, 10)) == []


def test_appends_must_be_strictly_increasing(mem):
    mem.create_tiny_folder("/t")
    with mem.update() as up:
        up.tiny_append("/t", 10, 1.0)
        with pytest.raises(OutOfOrder):
            up.tiny_append("/t", 10, 2.0)


def test_ordering_enforced_across_sessions(mem):
    stream(mem, "/t", [(10, 1.0)])
    with pytest.raises(OutOfOrder):
        with mem.update() as up:
            up.tiny_append("/t", 5, 2.0)


def test_aborted_appends_release_their_timestamps(mem):
    stream(mem, "/t", [(10, 1.0)])
    up = mem.update()
    up.tiny_append("/t", 20, 2.0)
    up.abort()
    with mem.update() as up:
        up.tiny_append("/t", 11, 3.0)
    assert mem.tiny_read("/t", 50).value == 3.0


def test_int64_streams(mem):
    stream(mem, "/t", [(10, 7), (20, -9)], value_kind="int64")
    assert mem.tiny_read("/t", 15).value == 7
    assert mem.tiny_read("/t", 25).value == -9
    with pytest.raises(SchemaMismatch):
        with mem.update() as up:
            up.tiny_append("/t", 30, 1.5)


def test_value_kind_validation(mem):
    with pytest.raises(InvalidArgument):
        mem.create_tiny_folder("/bad", value_kind="string")
    stream(mem, "/t", [])
    with pytest.raises(SchemaMismatch):
        with mem.update() as up:
            up.tiny_append("/t", 10, "x")
    with pytest.raises(SchemaMismatch):
        with mem.update() as up:
            up.tiny_append("/t", 10, True)


def test_int_coerces_to_float_stream(mem):
    stream(mem, "/t", [(10, 3)])
    got = mem.tiny_read("/t", 10)
    assert got.value == 3.0 and isinstance(got.value, float)


def test_object_ops_reject_tiny_folders(mem):
    stream(mem, "/t", [(10, 1.0)])
    with pytest.raises(NoSuchFolder):
        mem.find_object("/t", 10)
    with pytest.raises(NoSuchFolder):
        with mem.update() as up:
            up.store_object("/t", 0, 10, (1.0,))
    with pytest.raises(NoSuchFolder):
        mem.tiny_read("/nope", 5)


def test_tiny_append_rejects_plus_inf_timestamp(mem):
    mem.create_tiny_folder("/t")
    with pytest.raises(InvalidArgument):
        with mem.update() as up:
            up.tiny_append("/t", PLUS_INF, 1.0)


def test_randomized_stream_matches_oracle(mem):
    rng = random.Random(40)
    ts = sorted(rng.sample(range(1, 10**6), 400))
    samples = [(t, rng.random()) for t in ts]
    stream(mem, "/t", samples)
    oracle = TinyOracle(samples)
    for _ in range(500):
        at = rng.randrange(0, 10**6 + 10)
        expected = oracle.read(at)
        if expected is None:
            with pytest.raises(NoValidObject):
                mem.tiny_read("/t", at)
            continue
        e_ts, e_val, e_since, e_till = expected
        got = mem.tiny_read("/t", at)
        assert (got.at, got.value) == (e_ts, e_val)
        assert (got.effective.since, got.effective.till) == (e_since, e_till)
    for _ in range(50):
        lo = rng.randrange(0, 10**6)
        hi = lo + rng.randrange(1, 10**5)
        assert list(mem.tiny_scan("/t", lo, hi)) == oracle.scan(lo, hi)


def test_stream_survives_reopen(froot):
    store = open_store(froot, create=True)
    samples = [(i * 3, float(i)) for i in range(5000)]
    stream(store, "/t", samples)
    store.close()
    again = open_store(froot)
    try:
        assert list(again.tiny_scan("/t", MINUS_INF, PLUS_INF)) == samples
        with again.update() as up:
            up.tiny_append("/t", 10**9, 1.25)
        assert again.tiny_read("/t", 10**9).value == 1.25
    finally:
        again.close()


def test_on_disk_cost_stays_small(froot):
    store = open_store(froot, create=True, sync=False)
    n = 20000
    stream(store, "/t", [(i, float(i)) for i in range(n)])
    store.close()
    col = os.path.join(froot, "t1.col")
    per_sample = os.path.getsize(col) / n
    assert per_sample <= 24


def test_describe_counts_samples(mem):
    stream(mem, "/t", [(i, float(i)) for i in range(7)])
    info = mem.describe_folder("/t")
    assert info.count == 7
    assert info.schema == make_schema([("value", "float64")])
