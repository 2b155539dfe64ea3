"""Partition routing, pruning digests, and portable chunk files.

A folder's partition policy fixes how committed objects map to partition
indexes: on the time axis an object belongs to floor(since / chunk), on the
version axis to floor((seq - 1) / chunk). Unpartitioned folders put
everything in partition 0. Partitions can be exported to a chunk file,
evicted from the store, and imported back (or into a twin store); per
partition summaries survive eviction so reads that would need an offline
partition fail loudly instead of answering wrong.
"""

from __future__ import annotations

import os
import struct
import zlib

from .errors import (
    AlreadyExists,
    ChecksumFailure,
    ChunkMismatch,
    CorruptStore,
    InvalidArgument,
    NoSuchPartition,
    PartitionOffline,
)
from .model import FolderKind, PartitionAxis, PartitionPolicy
from .wire import (
    CHUNK_MAGIC,
    FORMAT_VERSION,
    REC_OBJECT,
    Reader,
    Writer,
    decode_object_body,
    decode_policy,
    decode_schema,
    encode_object_record,
    encode_policy,
    encode_schema,
    iter_records,
)

_TS_VAL = struct.Struct("<Qd")
_TS_INT = struct.Struct("<Qq")

_CHUNK_KIND = {FolderKind.FOLDER: 0, FolderKind.TINY: 1}
_KIND_FROM_CHUNK = {v: k for k, v in _CHUNK_KIND.items()}


def partition_index(policy: PartitionPolicy, since: int, seq: int) -> int:
    """Partition an object (or sample timestamp) belongs to under a policy."""
    if policy.axis is PartitionAxis.TIME:
        return since // policy.chunk
    if policy.axis is PartitionAxis.VERSION:
        return (seq - 1) // policy.chunk
    return 0


def summary_covers(summary, lo: int, hi: int) -> bool:
    """Whether a partition's time coverage intersects the half-open [lo, hi)."""
    return summary.min_since < hi and summary.max_till > lo


def _encode_summary(w: Writer, s):
    w.u64(s.min_since)
    w.u64(s.max_till)
    w.u64(s.min_seq)
    w.u64(s.max_seq)
    w.u64(s.count)


def _decode_summary(r: Reader):
    from .engine import Summary

    return Summary(r.u64(), r.u64(), r.u64(), r.u64(), r.u64())


def encode_chunk(node, pidx: int, summary, objects=None, samples=None) -> bytes:
    """Serialize one resident partition to portable chunk bytes."""
    w = Writer()
    w.raw(CHUNK_MAGIC)
    w.u16(FORMAT_VERSION)
    w.u8(_CHUNK_KIND[node.kind])
    w.string(str(node.path))
    encode_schema(w, node.schema)
    encode_policy(w, node.policy)
    w.u64(pidx)
    _encode_summary(w, summary)
    if node.kind is FolderKind.TINY:
        packer = _TS_INT if node.schema.attributes[0][1].value == "int64" else _TS_VAL
        w.u32(len(samples[0]))
        for ts, value in zip(*samples):
            w.raw(packer.pack(ts, value))
    else:
        w.u32(len(objects))
        for seq, since, till, values in objects:
            w.raw(encode_object_record(node.schema, seq, since, till, values))
    body = w.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


def decode_chunk(data: bytes):
    """Parse chunk bytes into (kind, path_str, schema, policy, pidx, summary, items).

    items is a list of (seq, since, till, values) for regular folders or a
    list of (ts, value) samples for tiny folders.
    """
    if len(data) < 10 or data[:4] != CHUNK_MAGIC:
        raise ChunkMismatch("not a partition chunk file")
    body, tail = data[:-4], data[-4:]
    (crc,) = struct.unpack("<I", tail)
    if zlib.crc32(body) != crc:
        raise ChecksumFailure("chunk checksum does not match its content")
    r = Reader(body, offset=4)
    version = r.u16()
    if version != FORMAT_VERSION:
        raise ChunkMismatch(f"unsupported chunk format version {version}")
    kind_code = r.u8()
    if kind_code not in _KIND_FROM_CHUNK:
        raise ChunkMismatch(f"unknown chunk folder kind {kind_code}")
    kind = _KIND_FROM_CHUNK[kind_code]
    path_str = r.string()
    schema = decode_schema(r)
    policy = decode_policy(r)
    pidx = r.u64()
    summary = _decode_summary(r)
    count = r.u32()
    items = []
    if kind is FolderKind.TINY:
        packer = _TS_INT if schema.attributes[0][1].value == "int64" else _TS_VAL
        for _ in range(count):
            raw = body[r.pos:r.pos + 16]
            if len(raw) != 16:
                raise CorruptStore("chunk sample stream truncated")
            r.pos += 16
            items.append(packer.unpack(raw))
    else:
        pos = r.pos
        for rec_kind, rec_body, end in iter_records(body, pos):
            if rec_kind != REC_OBJECT:
                raise ChunkMismatch(f"unexpected record kind {rec_kind} in chunk")
            items.append(decode_object_body(rec_body, schema))
            pos = end
            if len(items) == count:
                break
    if len(items) != count:
        raise CorruptStore(f"chunk promises {count} records, found {len(items)}")
    return kind, path_str, schema, policy, pidx, summary, items


def export_chunk(fs, pidx: int, dest) -> int:
    """Write one resident partition of a folder to dest (path or file object).

    Returns the number of exported records. The caller holds the store lock.
    """
    node = fs.node
    if node.policy.axis is PartitionAxis.NONE:
        raise NoSuchPartition(f"{node.path} is not partitioned")
    if pidx in fs.offline:
        raise PartitionOffline(f"partition {pidx} of {node.path} is evicted")
    summary = fs.summaries.get(pidx)
    if summary is None or summary.count == 0:
        raise NoSuchPartition(f"{node.path} has no partition {pidx}")
    if node.kind is FolderKind.TINY:
        tc = fs.tiny[pidx]
        data = encode_chunk(node, pidx, summary, samples=(tc.ts, tc.vals))
        count = len(tc)
    else:
        cols = fs.parts[pidx]
        objects = list(zip(cols.seq, cols.since, cols.till, cols.values))
        data = encode_chunk(node, pidx, summary, objects=objects)
        count = len(cols)
    if hasattr(dest, "write"):
        dest.write(data)
    else:
        tmp = f"{dest}.tmp.{os.getpid()}"
        with open(tmp, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, dest)
    return count


def import_chunk(store, fs, source) -> int:
    """Bring a chunk back into a folder. The caller holds the store lock.

    The chunk must match the folder's path, schema and policy; a resident
    target partition raises AlreadyExists. When the summary of the eviction
    is still known it must agree with the chunk's.
    """
    from .backends.base import CommitGroup

    if hasattr(source, "read"):
        data = source.read()
    else:
        try:
            with open(source, "rb") as f:
                data = f.read()
        except OSError as exc:
            raise InvalidArgument(f"cannot read chunk {source}: {exc}") from None
    kind, path_str, schema, policy, pidx, summary, items = decode_chunk(data)
    node = fs.node
    if kind is not node.kind:
        raise ChunkMismatch(f"chunk holds a {kind.value} partition, folder is a {node.kind.value}")
    if path_str != str(node.path):
        raise ChunkMismatch(f"chunk belongs to {path_str}, not {node.path}")
    if schema != node.schema:
        raise ChunkMismatch("chunk schema differs from the folder schema")
    if policy != node.policy:
        raise ChunkMismatch("chunk partition policy differs from the folder policy")
    resident = fs.summaries.get(pidx)
    if resident is not None and resident.count > 0:
        raise AlreadyExists(f"partition {pidx} of {node.path} is already resident")
    digest = fs.offline.get(pidx)
    if digest is not None and digest != summary:
        raise ChunkMismatch(f"chunk content disagrees with the evicted partition {pidx} digest")
    if not items:
        raise ChunkMismatch("chunk holds no records")
    if node.kind is FolderKind.TINY:
        last = None
        for ts, _ in items:
            if partition_index(policy, ts, 0) != pidx:
                raise ChunkMismatch(f"sample at {ts} does not route to partition {pidx}")
            if last is not None and ts <= last:
                raise ChunkMismatch("chunk samples are not strictly increasing")
            last = ts
    else:
        for seq, since, till, values in items:
            if partition_index(policy, since, seq) != pidx:
                raise ChunkMismatch(f"object seq {seq} does not route to partition {pidx}")
    group = CommitGroup()
    typecode = "q" if node.schema.attributes[0][1].value == "int64" else "d"
    group.imports.append((fs.fid, pidx, node.kind, node.schema, typecode, list(items)))
    store._backend.commit_group(group)
    if node.kind is FolderKind.TINY:
        store._apply_tiny(fs, items)
    else:
        store._apply_objects(fs, items)
    fs.offline.pop(pidx, None)
    fs.residency_epoch += 1
    fs.tiling_cache.clear()
    return len(items)
