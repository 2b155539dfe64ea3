"""Partitioning: routing, query transparency, export/evict/import motion."""

from __future__ import annotations

import os
import random

import pytest

from condstore import (
    MINUS_INF,
    PLUS_INF,
    PartitionAxis,
    PartitionPolicy,
    StoreStrategy,
    make_schema,
    open_store,
)
from condstore.errors import (
    AlreadyExists,
    ChecksumFailure,
    ChunkMismatch,
    InvalidArgument,
    NoSuchPartition,
    NoValidObject,
    PartitionOffline,
)
from condstore.partition import decode_chunk, partition_index

SCHEMA = make_schema([("v", "int64")])
TIME100 = PartitionPolicy(PartitionAxis.TIME, 100)
VERS8 = PartitionPolicy(PartitionAxis.VERSION, 8)


def fill(store, path, triples, policy=None, strategy=StoreStrategy.LAYERED):
    with store.update() as up:
        up.create_folder(path, SCHEMA, strategy=strategy, policy=policy)
        return [up.store_object(path, s, t, (v,)) for s, t, v in triples]


def random_triples(seed, n=150, span=1000):
    rng = random.Random(seed)
    out = []
    for i in range(n):
        s = rng.randrange(0, span)
        t = PLUS_INF if rng.random() < 0.05 else s + rng.randrange(1, span // 5)
        out.append((s, t, i))
    return out


def full_view(store, path, probes):
    view = []
    for t in probes:
        try:
            got = store.find_object(path, t)
            view.append((got.seq, got.effective.since, got.effective.till, got.values))
        except NoValidObject:
            view.append(None)
    got = store.browse_objects(path, MINUS_INF, PLUS_INF)
    view.append([(g.seq, g.effective.since, g.effective.till) for g in got])
    return view


# -------------------------------------------------------------------- routing

def test_partition_index_time_axis():
    assert partition_index(TIME100, 0, 1) == 0
    assert partition_index(TIME100, 99, 5) == 0
    assert partition_index(TIME100, 100, 5) == 1
    assert partition_index(TIME100, 1050, 5) == 10


def test_partition_index_version_axis():
    assert partition_index(VERS8, 0, 1) == 0
    assert partition_index(VERS8, 0, 8) == 0
    assert partition_index(VERS8, 0, 9) == 1
    assert partition_index(VERS8, 10**9, 17) == 2


def test_unpartitioned_routes_to_zero():
    assert partition_index(PartitionPolicy(), 12345, 678) == 0


def test_residency_reflects_routing(mem):
    fill(mem, "/t", [(i * 40, i * 40 + 50, i) for i in range(10)], policy=TIME100)
    rows = mem.partition_residency("/t")
    assert [(p, c, r) for p, c, r in rows] == [(0, 3, True), (1, 2, True), (2, 3, True), (3, 2, True)]


def test_policy_constraints(mem):
    with pytest.raises(InvalidArgument):
        mem.create_folder("/bad", SCHEMA, strategy=StoreStrategy.LEGACY_TRUNCATE, policy=TIME100)
    with pytest.raises(InvalidArgument):
        mem.create_tiny_folder("/bad2", policy=VERS8)


# --------------------------------------------------------------- transparency

@pytest.mark.parametrize("policy", [TIME100, VERS8], ids=["time", "version"])
def test_partitioned_folder_answers_like_a_flat_twin(mem, policy):
    triples = random_triples(21)
    fill(mem, "/flat", triples)
    fill(mem, "/part", triples, policy=policy)
    probes = list(range(0, 1300, 11)) + [PLUS_INF - 1]
    assert full_view(mem, "/part", probes) == full_view(mem, "/flat", probes)


def test_transparency_holds_under_sequence_ceilings(mem):
    triples = random_triples(22, n=60)
    seqs = fill(mem, "/flat", triples)
    fill(mem, "/part", triples, policy=VERS8)
    probes = list(range(0, 1300, 37))
    for ceiling in (1, 7, 8, 9, 30, len(seqs)):
        for t in probes:
            try:
                a = mem.find_object("/flat", t, at_seq=ceiling)
            except NoValidObject:
                with pytest.raises(NoValidObject):
                    mem.find_object("/part", t, at_seq=ceiling)
                continue
            b = mem.find_object("/part", t, at_seq=ceiling)
            assert (a.seq, a.effective, a.values) == (b.seq, b.effective, b.values)


# ------------------------------------------------------------ export / import

def test_export_decode_roundtrip(fstore, tmp_path):
    fill(fstore, "/t", [(i * 30, i * 30 + 40, i) for i in range(12)], policy=TIME100)
    dest = str(tmp_path / "p0.chunk")
    count = fstore.export_partition("/t", 0, dest)
    assert count > 0
    kind, path_str, schema, policy, pidx, summary, items = decode_chunk(open(dest, "rb").read())
    assert path_str == "/t"
    assert schema == SCHEMA
    assert policy == TIME100
    assert pidx == 0
    assert summary.count == len(items) == count
    assert all(partition_index(policy, s, q) == 0 for q, s, _, _ in items)


def test_evict_then_import_is_query_identity(fstore, tmp_path):
    triples = random_triples(5, n=200, span=800)
    fill(fstore, "/t", triples, policy=TIME100)
    probes = list(range(0, 1100, 7))
    before = full_view(fstore, "/t", probes)
    moved = []
    for pidx, count, resident in fstore.partition_residency("/t"):
        if count and pidx % 2 == 0:
            dest = str(tmp_path / f"p{pidx}.chunk")
            fstore.export_partition("/t", pidx, dest)
            fstore.evict_partition("/t", pidx)
            moved.append((pidx, dest))
    assert moved
    for pidx, dest in moved:
        assert fstore.import_partition("/t", dest) > 0
    assert full_view(fstore, "/t", probes) == before


def test_evicted_partition_blocks_only_queries_that_need_it(fstore, tmp_path):
    fill(fstore, "/t", [(i * 100 + 10, i * 100 + 90, i) for i in range(4)], policy=TIME100)
    dest = str(tmp_path / "p1.chunk")
    fstore.export_partition("/t", 1, dest)
    fstore.evict_partition("/t", 1)
    assert fstore.find_object("/t", 20).values == (0,)
    assert fstore.find_object("/t", 320).values == (3,)
    with pytest.raises(PartitionOffline):
        fstore.find_object("/t", 150)
    with pytest.raises(PartitionOffline):
        fstore.browse_objects("/t", 0, 400)
    rows = {p: resident for p, _, resident in fstore.partition_residency("/t")}
    assert rows[1] is False and rows[0] is True


def test_eviction_survives_reopen(froot, tmp_path):
    store = open_store(froot, create=True)
    fill(store, "/t", [(i * 100 + 10, i * 100 + 90, i) for i in range(4)], policy=TIME100)
    dest = str(tmp_path / "p2.chunk")
    store.export_partition("/t", 2, dest)
    store.evict_partition("/t", 2)
    store.close()

    again = open_store(froot)
    try:
        with pytest.raises(PartitionOffline):
            again.find_object("/t", 250)
        assert again.import_partition("/t", dest) == 1
        assert again.find_object("/t", 250).values == (2,)
    finally:
        again.close()


def test_tiny_folder_partitions_move_too(fstore, tmp_path):
    with fstore.update() as up:
        up.create_tiny_folder("/tiny", policy=PartitionPolicy(PartitionAxis.TIME, 50))
        for i in range(20):
            up.tiny_append("/tiny", i * 10, float(i))
    before = list(fstore.tiny_scan("/tiny", MINUS_INF, PLUS_INF))
    dest = str(tmp_path / "t1.chunk")
    assert fstore.export_partition("/tiny", 1, dest) == 5
    fstore.evict_partition("/tiny", 1)
    with pytest.raises(PartitionOffline):
        fstore.tiny_read("/tiny", 60)
    fstore.import_partition("/tiny", dest)
    assert list(fstore.tiny_scan("/tiny", MINUS_INF, PLUS_INF)) == before


# ------------------------------------------------------------------ bad moves

def test_export_validation(fstore, tmp_path):
    fill(fstore, "/t", [(0, 10, 1)], policy=TIME100)
    fill(fstore, "/flat", [(0, 10, 1)])
    with pytest.raises(NoSuchPartition):
        fstore.export_partition("/t", 7, str(tmp_path / "x.chunk"))
    with pytest.raises(NoSuchPartition):
        fstore.export_partition("/flat", 1, str(tmp_path / "y.chunk"))


def test_evict_validation(fstore, tmp_path):
    fill(fstore, "/t", [(0, 10, 1)], policy=TIME100)
    with pytest.raises(NoSuchPartition):
        fstore.evict_partition("/t", 7)
    fstore.export_partition("/t", 0, str(tmp_path / "p.chunk"))
    fstore.evict_partition("/t", 0)
    with pytest.raises(PartitionOffline):
        fstore.evict_partition("/t", 0)
    with pytest.raises(PartitionOffline):
        fstore.export_partition("/t", 0, str(tmp_path / "q.chunk"))


def test_import_rejects_wrong_folder_and_damage(fstore, tmp_path):
    fill(fstore, "/a", [(i * 20, i * 20 + 30, i) for i in range(10)], policy=TIME100)
    fill(fstore, "/b", [(i * 20, i * 20 + 30, i) for i in range(10)], policy=TIME100)
    chunk = str(tmp_path / "a0.chunk")
    fstore.export_partition("/a", 0, chunk)
    fstore.evict_partition("/a", 0)
    with pytest.raises(ChunkMismatch):
        fstore.import_partition("/b", chunk)
    with pytest.raises(InvalidArgument):
        fstore.import_partition("/a", str(tmp_path / "missing.chunk"))

    raw = bytearray(open(chunk, "rb").read())
    raw[len(raw) // 2] ^= 0xFF
    bad = str(tmp_path / "bad.chunk")
    open(bad, "wb").write(bytes(raw))
    with pytest.raises(ChecksumFailure):
        fstore.import_partition("/a", bad)
    # the clean chunk still imports after the failed attempts
    assert fstore.import_partition("/a", chunk) > 0


def test_import_rejects_a_resident_partition(fstore, tmp_path):
    fill(fstore, "/t", [(0, 10, 1)], policy=TIME100)
    chunk = str(tmp_path / "p.chunk")
    fstore.export_partition("/t", 0, chunk)
    with pytest.raises(AlreadyExists):
        fstore.import_partition("/t", chunk)


def test_not_a_chunk_file(fstore, tmp_path):
    fill(fstore, "/t", [(0, 10, 1)], policy=TIME100)
    junk = str(tmp_path / "junk.chunk")
    open(junk, "wb").write(b"this is not a chunk")
    with pytest.raises(ChunkMismatch):
        fstore.import_partition("/t", junk)
