"""Durable directory-backed store.

Layout inside the store directory:

  MANIFEST      magic "CDBS", format version, creation timestamp (ns)
  catalog.log   framed records: folder creation, tags, partition motion,
                checkpoint markers, and one COMMIT record per commit group
  f<fid>.log    framed object records of one folder, append-only
  t<fid>.col    packed tiny samples (16 bytes each), a CRC32 word after
                every 4096 samples
  f<fid>.idx    optional per-folder checkpoint snapshot
  LOCK          writer lock (pid), absent when no writer is attached

Commit protocol: folder log and sample column appends are flushed first,
then a COMMIT record naming the new committed byte/sample extents is
appended to the catalog. Recovery walks catalog commit groups in order and
replays exactly the named extents, so a torn tail (partial record or a
group missing its COMMIT) rolls back to the last committed prefix. A
checkpoint snapshots folder state into idx files; on open those replace the
replay of everything up to the checkpoint record.
"""

from __future__ import annotations

import os
import socket
import struct
import time
import zlib
from array import array

from ..errors import (
    AlreadyExists,
    CorruptStore,
    InvalidArgument,
    LockHeld,
    ReadOnlyStore,
)
from ..model import (
    FolderKind,
    FolderNode,
    PayloadSchema,
    StoreStrategy,
    TagSnapshot,
    parse_path,
)
from ..wire import (
    FORMAT_VERSION,
    INDEX_MAGIC,
    MANIFEST_MAGIC,
    REC_CHECKPOINT,
    REC_COMMIT,
    REC_EVICT,
    REC_FOLDER,
    REC_FOLDERSET,
    REC_IMPORT,
    REC_OBJECT,
    REC_TAG,
    Reader,
    Writer,
    decode_object_body,
    decode_policy,
    decode_schema,
    decode_values,
    encode_object_record,
    encode_policy,
    encode_schema,
    encode_values,
    frame_record,
    iter_records,
)
from .base import Backend, CommitGroup

MANIFEST_NAME = "MANIFEST"
CATALOG_NAME = "catalog.log"
LOCK_NAME = "LOCK"

BLOCK_SAMPLES = 4096
SAMPLE_BYTES = 16
BLOCK_BYTES = BLOCK_SAMPLES * SAMPLE_BYTES  # payload bytes per CRC block

_U32 = struct.Struct("<I")
_TS_F64 = struct.Struct("<Qd")
_TS_I64 = struct.Struct("<Qq")

_STRATEGY_CODE = {StoreStrategy.LAYERED: 0, StoreStrategy.LEGACY_TRUNCATE: 1, None: 255}
_STRATEGY_FROM = {0: StoreStrategy.LAYERED, 1: StoreStrategy.LEGACY_TRUNCATE, 255: None}
_FKIND_CODE = {FolderKind.FOLDER: 0, FolderKind.TINY: 1}
_FKIND_FROM = {v: k for k, v in _FKIND_CODE.items()}


def col_byte_length(samples: int) -> int:
    """On-disk length of a sample column holding `samples` entries."""
    full, rest = divmod(samples, BLOCK_SAMPLES)
    return full * (BLOCK_BYTES + 4) + rest * SAMPLE_BYTES


def col_sample_offset(i: int) -> int:
    block, rest = divmod(i, BLOCK_SAMPLES)
    return block * (BLOCK_BYTES + 4) + rest * SAMPLE_BYTES


def write_manifest(path: str):
    w = Writer()
    w.raw(MANIFEST_MAGIC)
    w.u16(FORMAT_VERSION)
    w.u64(time.time_ns())
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as f:
        f.write(w.getvalue())
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def read_manifest(path: str) -> int:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except FileNotFoundError:
        raise InvalidArgument(f"{os.path.dirname(path) or '.'} is not a store (missing MANIFEST)")
    if len(data) != 14 or data[:4] != MANIFEST_MAGIC:
        raise CorruptStore("MANIFEST is not a store manifest")
    r = Reader(data, 4)
    version = r.u16()
    if version != FORMAT_VERSION:
        raise CorruptStore(f"unsupported store format version {version}")
    return r.u64()


class FolderSnapshot:
    """Decoded idx file content; applied onto a FolderState wholesale."""

    def __init__(self, state_kind, next_seq, max_seq, tiny_last_ts,
                 parts, summaries, offline, legacy_rows, tiny):
        self.state_kind = state_kind
        self.next_seq = next_seq
        self.max_seq = max_seq
        self.tiny_last_ts = tiny_last_ts
        self.parts = parts
        self.summaries = summaries
        self.offline = offline
        self.legacy_rows = legacy_rows
        self.tiny = tiny

    def apply(self, fs):
        fs.next_seq = self.next_seq
        fs.max_committed_seq = self.max_seq
        fs.tiny_last_ts = self.tiny_last_ts
        fs.parts = self.parts
        fs.summaries = self.summaries
        fs.offline = self.offline
        fs.legacy_rows = self.legacy_rows
        fs.tiny = self.tiny


class FileBackend(Backend):
    """Append-only log files under one directory, one writer at a time."""

    def __init__(self, root: str, readonly: bool = False, create: bool = False,
                 sync: bool = True):
        self.root = os.path.abspath(root)
        self.readonly = readonly
        self.sync = sync
        self._catalog = None
        self._logs: dict[int, object] = {}
        self._cols: dict[int, object] = {}
        self._log_bytes: dict[int, int] = {}
        self._col_samples: dict[int, int] = {}
        self._col_crc: dict[int, tuple[int, int]] = {}
        self._schemas: dict[int, tuple[PayloadSchema, str | None]] = {}
        self._fid_kind: dict[int, FolderKind] = {}
        self._idx_log_bytes: dict[int, int] = {}
        self._idx_col_samples: dict[int, int] = {}
        self._group_id = 0
        self._has_lock = False
        self._closed = False
        self._commits = 0
        self._bytes_written = 0
        manifest = os.path.join(self.root, MANIFEST_NAME)
        if create:
            if readonly:
                raise InvalidArgument("cannot create a store read-only")
            os.makedirs(self.root, exist_ok=True)
            if os.path.exists(manifest):
                raise AlreadyExists(f"{self.root} already holds a store")
            write_manifest(manifest)
        else:
            read_manifest(manifest)
        if not readonly:
            self._acquire_lock()

    # ----------------------------------------------------------------- lock
    def _lock_path(self) -> str:
        return os.path.join(self.root, LOCK_NAME)

    def _acquire_lock(self):
        path = self._lock_path()
        for attempt in (0, 1):
            try:
                fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
                with os.fdopen(fd, "w") as f:
                    f.write(f"{os.getpid()}\n{socket.gethostname()}\n")
                self._has_lock = True
                return
            except FileExistsError:
                holder = self._read_lock_holder(path)
                if attempt == 0 and holder is not None and not self._pid_alive(holder):
                    try:
                        os.unlink(path)  # stale lock from a dead writer
                        continue
                    except FileNotFoundError:
                        continue
                raise LockHeld(
                    f"store {self.root} is locked by pid {holder if holder is not None else '?'}"
                )

    @staticmethod
    def _read_lock_holder(path) -> int | None:
        try:
            with open(path) as f:
                return int(f.readline().strip())
        except (OSError, ValueError):
            return None

    @staticmethod
    def _pid_alive(pid: int) -> bool:
        try:
            os.kill(pid, 0)
        except ProcessLookupError:
            return False
        except PermissionError:
            return True
        return True

    def _release_lock(self):
        if self._has_lock:
            try:
                os.unlink(self._lock_path())
            except FileNotFoundError:
                pass
            self._has_lock = False

    # ------------------------------------------------------------- file I/O
    def _path_log(self, fid: int) -> str:
        return os.path.join(self.root, f"f{fid}.log")

    def _path_col(self, fid: int) -> str:
        return os.path.join(self.root, f"t{fid}.col")

    def _path_idx(self, fid: int) -> str:
        return os.path.join(self.root, f"f{fid}.idx")

    def _catalog_handle(self):
        if self._catalog is None:
            self._catalog = open(os.path.join(self.root, CATALOG_NAME), "ab")
        return self._catalog

    def _log_handle(self, fid: int):
        h = self._logs.get(fid)
        if h is None:
            h = self._logs[fid] = open(self._path_log(fid), "ab")
        return h

    def _col_handle(self, fid: int):
        h = self._cols.get(fid)
        if h is None:
            h = self._cols[fid] = open(self._path_col(fid), "ab")
        return h

    def _write(self, handle, data: bytes):
        handle.write(data)
        self._bytes_written += len(data)

    def _flush(self, handle):
        handle.flush()
        if self.sync:
            os.fsync(handle.fileno())

    # --------------------------------------------------------------- commit
    def commit_group(self, group: CommitGroup) -> None:
        if self.readonly:
            raise ReadOnlyStore("store opened read-only")
        catalog = Writer()
        for node, fid in group.nodes:
            catalog.raw(self._encode_node(node, fid))
            typecode = None
            if node.kind is FolderKind.TINY:
                typecode = "q" if node.schema.attributes[0][1].value == "int64" else "d"
            if node.schema is not None:
                self._schemas[fid] = (node.schema, typecode)
            self._fid_kind[fid] = node.kind
        touched_logs: list[int] = []
        touched_cols: list[int] = []
        for fid, schema, items in group.objects:
            buf = bytearray()
            for seq, since, till, values in items:
                buf += encode_object_record(schema, seq, since, till, values)
            self._write(self._log_handle(fid), bytes(buf))
            self._log_bytes[fid] = self._log_bytes.get(fid, 0) + len(buf)
            touched_logs.append(fid)
        for fid, typecode, samples in group.tiny:
            self._append_col(fid, typecode, samples)
            touched_cols.append(fid)
        for fid, pidx, kind, schema, typecode, items in group.imports:
            if kind is FolderKind.TINY:
                self._append_col(fid, typecode, items)
                touched_cols.append(fid)
            else:
                buf = bytearray()
                for seq, since, till, values in items:
                    buf += encode_object_record(schema, seq, since, till, values)
                self._write(self._log_handle(fid), bytes(buf))
                self._log_bytes[fid] = self._log_bytes.get(fid, 0) + len(buf)
                touched_logs.append(fid)
            catalog.raw(self._encode_import(fid, pidx))
        for tag, entries in group.tags:
            catalog.raw(self._encode_tag(tag, entries))
        for fid, pidx in group.evicts:
            catalog.raw(self._encode_evict(fid, pidx))
        for fid in touched_logs:
            self._flush(self._logs[fid])
        for fid in touched_cols:
            self._flush(self._cols[fid])
        self._group_id += 1
        marker_fids = sorted(set(touched_logs) | set(touched_cols) | set(group.counters))
        w = Writer()
        w.u64(self._group_id)
        w.u32(len(marker_fids))
        for fid in marker_fids:
            next_seq, _ = group.counters.get(fid, (None, None))
            w.u32(fid)
            w.u64(self._log_bytes.get(fid, 0))
            w.u64(self._col_samples.get(fid, 0))
            w.u64(next_seq or 0)
        catalog.raw(frame_record(REC_COMMIT, w.getvalue()))
        h = self._catalog_handle()
        self._write(h, catalog.getvalue())
        self._flush(h)
        self._commits += 1

    def _append_col(self, fid: int, typecode: str, samples):
        packer = _TS_I64 if typecode == "q" else _TS_F64
        in_block, crc = self._col_crc.get(fid, (0, 0))
        out = bytearray()
        for ts, value in samples:
            chunk = packer.pack(ts, value)
            out += chunk
            crc = zlib.crc32(chunk, crc)
            in_block += 1
            if in_block == BLOCK_SAMPLES:
                out += _U32.pack(crc)
                in_block, crc = 0, 0
        self._col_crc[fid] = (in_block, crc)
        self._write(self._col_handle(fid), bytes(out))
        self._col_samples[fid] = self._col_samples.get(fid, 0) + len(samples)

    # --------------------------------------------------------- record codecs
    def _encode_node(self, node: FolderNode, fid: int) -> bytes:
        w = Writer()
        w.u32(fid)
        w.string(str(node.path))
        w.string(node.description)
        if node.kind is FolderKind.FOLDERSET:
            return frame_record(REC_FOLDERSET, w.getvalue())
        w.u8(_FKIND_CODE[node.kind])
        w.u8(_STRATEGY_CODE[node.strategy])
        encode_schema(w, node.schema)
        encode_policy(w, node.policy)
        return frame_record(REC_FOLDER, w.getvalue())

    def _decode_node(self, kind: int, body: bytes) -> tuple[FolderNode, int]:
        r = Reader(body)
        fid = r.u32()
        path = parse_path(r.string())
        description = r.string()
        if kind == REC_FOLDERSET:
            return FolderNode(path, FolderKind.FOLDERSET, description), fid
        fkind = _FKIND_FROM.get(r.u8())
        strategy = _STRATEGY_FROM.get(r.u8())
        if fkind is None:
            raise CorruptStore("unknown folder kind in catalog")
        schema = decode_schema(r)
        policy = decode_policy(r)
        node = FolderNode(path, fkind, description, schema, policy, strategy)
        return node, fid

    def _encode_tag(self, tag: TagSnapshot, entries) -> bytes:
        w = Writer()
        w.string(tag.name)
        w.u64(tag.created_at)
        w.u32(len(tag.entries))
        for (path, seq), (fid, _) in zip(tag.entries, entries):
            w.u32(fid)
            w.string(str(path))
            w.u64(seq)
        return frame_record(REC_TAG, w.getvalue())

    @staticmethod
    def _decode_tag(body: bytes) -> TagSnapshot:
        r = Reader(body)
        name = r.string()
        created = r.u64()
        n = r.u32()
        entries = []
        for _ in range(n):
            r.u32()  # fid, redundant with the path
            path = parse_path(r.string())
            entries.append((path, r.u64()))
        return TagSnapshot(name, tuple(entries), created)

    @staticmethod
    def _encode_evict(fid: int, pidx: int) -> bytes:
        w = Writer()
        w.u32(fid)
        w.u64(pidx)
        return frame_record(REC_EVICT, w.getvalue())

    @staticmethod
    def _encode_import(fid: int, pidx: int) -> bytes:
        w = Writer()
        w.u32(fid)
        w.u64(pidx)
        return frame_record(REC_IMPORT, w.getvalue())

    # ----------------------------------------------------------------- load
    def load(self, store) -> None:
        catalog_path = os.path.join(self.root, CATALOG_NAME)
        try:
            with open(catalog_path, "rb") as f:
                data = f.read()
        except FileNotFoundError:
            return
        # split the catalog into terminated entries; drop the torn tail
        entries = []  # ("group", recs, marker) | ("checkpoint", ckpt_id, fids)
        pending: list[tuple[int, bytes]] = []
        committed_end = 0
        for kind, body, end in iter_records(data):
            if kind == REC_COMMIT:
                entries.append(("group", pending, self._decode_marker(body)))
                pending = []
                committed_end = end
            elif kind == REC_CHECKPOINT:
                r = Reader(body)
                ckpt_id = r.u64()
                fids = [r.u32() for _ in range(r.u32())]
                entries.append(("checkpoint", ckpt_id, fids))
                committed_end = end
            else:
                pending.append((kind, body))
        split = -1
        for i, entry in enumerate(entries):
            if entry[0] == "checkpoint":
                split = i
        log_cache: dict[int, bytes] = {}
        col_cache: dict[int, bytes] = {}
        log_pos: dict[int, int] = {}
        col_pos: dict[int, int] = {}
        # structure (folders, tags) up to and including the checkpoint first,
        # so the idx payloads can be decoded against known schemas
        pre_data = []
        for entry in entries[:split + 1]:
            if entry[0] == "group":
                deferred = self._replay_structure(store, entry[1])
                pre_data.append((entry[2], deferred))
        snapshots: dict[int, FolderSnapshot] = {}
        if split >= 0:
            _, ckpt_id, fids = entries[split]
            for fid in fids:
                snap = self._read_idx(fid, ckpt_id)
                if snap is not None:
                    snapshots[fid] = snap
        # data before the checkpoint, but only for folders whose idx was
        # missing or unusable; snapshot folders get their state wholesale
        for marker, deferred in pre_data:
            self._replay_data(store, marker, deferred, snapshots,
                              log_cache, col_cache, log_pos, col_pos)
        for fid, snap in snapshots.items():
            store.recover_folder_snapshot(fid, snap)
            log_pos[fid] = self._idx_log_bytes[fid]
            col_pos[fid] = self._idx_col_samples[fid]
        # full replay of everything after the checkpoint
        for entry in entries[split + 1:]:
            if entry[0] != "group":
                continue
            deferred = self._replay_structure(store, entry[1])
            self._replay_data(store, entry[2], deferred, {},
                              log_cache, col_cache, log_pos, col_pos)
        self._group_id = sum(1 for e in entries if e[0] == "group")
        self._log_bytes = dict(log_pos)
        self._col_samples = dict(col_pos)
        if not self.readonly:
            self._truncate_uncommitted(committed_end)
        for fid, n in self._col_samples.items():
            if n % BLOCK_SAMPLES:
                raw = col_cache.get(fid)
                if raw is None:
                    raw = self._read_file(self._path_col(fid))
                start = col_sample_offset(n - n % BLOCK_SAMPLES)
                self._col_crc[fid] = (n % BLOCK_SAMPLES,
                                      zlib.crc32(raw[start:col_byte_length(n)]))

    def _decode_marker(self, body: bytes):
        r = Reader(body)
        r.u64()  # group id
        n = r.u32()
        return [(r.u32(), r.u64(), r.u64(), r.u64()) for _ in range(n)]

    def _replay_structure(self, store, recs):
        """Apply folder/tag records of one group; return deferred motion ops."""
        deferred = []
        for kind, body in recs:
            if kind in (REC_FOLDERSET, REC_FOLDER):
                node, fid = self._decode_node(kind, body)
                store.recover_node(node, fid)
                typecode = None
                if node.kind is FolderKind.TINY:
                    typecode = "q" if node.schema.attributes[0][1].value == "int64" else "d"
                if node.schema is not None:
                    self._schemas[fid] = (node.schema, typecode)
                self._fid_kind[fid] = node.kind
            elif kind == REC_TAG:
                store.recover_tag(self._decode_tag(body))
            elif kind in (REC_EVICT, REC_IMPORT):
                r = Reader(body)
                deferred.append((kind, r.u32(), r.u64()))
            else:
                raise CorruptStore(f"unexpected record kind {kind} in catalog group")
        return deferred

    def _replay_data(self, store, marker, deferred, skip,
                     log_cache, col_cache, log_pos, col_pos):
        """Apply one group's object/sample extents, then its motion ops."""
        for fid, log_bytes, col_samples, next_seq in marker:
            if fid in skip:
                continue
            start = log_pos.get(fid, 0)
            if log_bytes > start:
                self._replay_log_range(store, fid, start, log_bytes, log_cache)
            if log_bytes > start or fid not in log_pos:
                log_pos[fid] = max(log_bytes, start)
            cstart = col_pos.get(fid, 0)
            if col_samples > cstart:
                self._replay_col_range(store, fid, cstart, col_samples, col_cache)
                col_pos[fid] = col_samples
            elif fid not in col_pos:
                col_pos[fid] = col_samples
            if next_seq:
                store.recover_counters(fid, next_seq, None)
        for kind, fid, pidx in deferred:
            if fid in skip:
                continue
            if kind == REC_EVICT:
                store.recover_evict(fid, pidx)
            else:
                store.recover_import(fid, pidx)

    def _read_file(self, path: str) -> bytes:
        try:
            with open(path, "rb") as f:
                return f.read()
        except FileNotFoundError:
            raise CorruptStore(f"missing store file {os.path.basename(path)}")

    def _replay_log_range(self, store, fid, start, end, cache):
        raw = cache.get(fid)
        if raw is None:
            raw = cache[fid] = self._read_file(self._path_log(fid))
        if end > len(raw):
            raise CorruptStore(f"f{fid}.log shorter than its committed length")
        schema_entry = self._schemas.get(fid)
        if schema_entry is None:
            raise CorruptStore(f"objects for unknown folder id {fid}")
        schema = schema_entry[0]
        items = []
        pos = start
        for kind, body, rec_end in iter_records(raw[:end], start):
            if kind != REC_OBJECT:
                raise CorruptStore(f"unexpected record kind {kind} in f{fid}.log")
            items.append(decode_object_body(body, schema))
            pos = rec_end
        if pos != end:
            raise CorruptStore(f"committed range of f{fid}.log is damaged")
        store.recover_objects(fid, items)
        store.count_replayed(len(items))

    def _replay_col_range(self, store, fid, start, end, cache):
        raw = cache.get(fid)
        if raw is None:
            raw = cache[fid] = self._read_file(self._path_col(fid))
            self._verify_col_blocks(fid, raw)
        need = col_byte_length(end)
        if need > len(raw):
            raise CorruptStore(f"t{fid}.col shorter than its committed length")
        entry = self._schemas.get(fid)
        if entry is None or entry[1] is None:
            raise CorruptStore(f"samples for unknown folder id {fid}")
        typecode = entry[1]
        packer = _TS_I64 if typecode == "q" else _TS_F64
        samples = []
        for i in range(start, end):
            samples.append(packer.unpack_from(raw, col_sample_offset(i)))
        store.recover_tiny(fid, samples)
        store.count_replayed(len(samples))

    def _verify_col_blocks(self, fid, raw: bytes):
        pos = 0
        while pos + BLOCK_BYTES + 4 <= len(raw):
            block = raw[pos:pos + BLOCK_BYTES]
            (crc,) = _U32.unpack_from(raw, pos + BLOCK_BYTES)
            if zlib.crc32(block) != crc:
                raise CorruptStore(f"t{fid}.col block checksum mismatch at byte {pos}")
            pos += BLOCK_BYTES + 4

    def _truncate_uncommitted(self, catalog_end: int):
        self._truncate(os.path.join(self.root, CATALOG_NAME), catalog_end)
        for name in os.listdir(self.root):
            if name.startswith("f") and name.endswith(".log"):
                try:
                    fid = int(name[1:-4])
                except ValueError:
                    continue
                self._truncate(os.path.join(self.root, name), self._log_bytes.get(fid, 0))
            elif name.startswith("t") and name.endswith(".col"):
                try:
                    fid = int(name[1:-4])
                except ValueError:
                    continue
                self._truncate(os.path.join(self.root, name),
                               col_byte_length(self._col_samples.get(fid, 0)))

    @staticmethod
    def _truncate(path: str, size: int):
        try:
            if os.path.getsize(path) > size:
                with open(path, "r+b") as f:
                    f.truncate(size)
        except FileNotFoundError:
            pass

    # ------------------------------------------------------------ checkpoint
    def checkpoint(self, store) -> None:
        if self.readonly:
            raise ReadOnlyStore("store opened read-only")
        ckpt_id = time.time_ns()
        fids = []
        for fs in store._folders.values():
            if fs.node.kind is FolderKind.FOLDERSET:
                continue
            self._write_idx(fs, ckpt_id)
            fids.append(fs.fid)
        w = Writer()
        w.u64(ckpt_id)
        w.u32(len(fids))
        for fid in fids:
            w.u32(fid)
        h = self._catalog_handle()
        self._write(h, frame_record(REC_CHECKPOINT, w.getvalue()))
        self._flush(h)

    def _write_idx(self, fs, ckpt_id: int):
        node = fs.node
        w = Writer()
        w.raw(INDEX_MAGIC)
        w.u16(FORMAT_VERSION)
        w.u64(ckpt_id)
        w.u32(fs.fid)
        if node.kind is FolderKind.TINY:
            state_kind = 2
        elif node.strategy is StoreStrategy.LEGACY_TRUNCATE:
            state_kind = 1
        else:
            state_kind = 0
        w.u8(state_kind)
        w.u64(fs.next_seq)
        w.u64(fs.max_committed_seq)
        w.i64(fs.tiny_last_ts)
        w.u64(self._log_bytes.get(fs.fid, 0))
        w.u64(self._col_samples.get(fs.fid, 0))
        if state_kind == 0:
            w.u32(len(fs.parts))
            for pidx in sorted(fs.parts):
                cols = fs.parts[pidx]
                w.u64(pidx)
                self._encode_summary(w, fs.summaries[pidx])
                w.u32(len(cols))
                w.raw(bytes(memoryview(cols.since)))
                w.raw(bytes(memoryview(cols.till)))
                w.raw(bytes(memoryview(cols.seq)))
                for values in cols.values:
                    encode_values(w, node.schema, values)
        elif state_kind == 1:
            w.u32(len(fs.legacy_rows))
            for since, till, seq, values in fs.legacy_rows:
                w.u64(since)
                w.u64(till)
                w.u64(seq)
                encode_values(w, node.schema, values)
        else:
            w.u32(len(fs.tiny))
            packer = _TS_I64 if fs.tiny_typecode == "q" else _TS_F64
            for pidx in sorted(fs.tiny):
                tc = fs.tiny[pidx]
                w.u64(pidx)
                self._encode_summary(w, fs.summaries[pidx])
                w.u32(len(tc))
                for ts, value in zip(tc.ts, tc.vals):
                    w.raw(packer.pack(ts, value))
        w.u32(len(fs.offline))
        for pidx in sorted(fs.offline):
            w.u64(pidx)
            self._encode_summary(w, fs.offline[pidx])
        body = w.getvalue()
        blob = body + _U32.pack(zlib.crc32(body))
        path = self._path_idx(fs.fid)
        tmp = f"{path}.tmp.{os.getpid()}"
        with open(tmp, "wb") as f:
            f.write(blob)
            f.flush()
            if self.sync:
                os.fsync(f.fileno())
        os.replace(tmp, path)

    @staticmethod
    def _encode_summary(w: Writer, s):
        w.u64(s.min_since)
        w.u64(s.max_till)
        w.u64(s.min_seq)
        w.u64(s.max_seq)
        w.u64(s.count)

    @staticmethod
    def _decode_summary(r: Reader):
        from ..engine import Summary

        return Summary(r.u64(), r.u64(), r.u64(), r.u64(), r.u64())

    def _read_idx(self, fid: int, ckpt_id: int) -> FolderSnapshot | None:
        from ..engine import Columns, TinyColumns

        try:
            with open(self._path_idx(fid), "rb") as f:
                blob = f.read()
        except FileNotFoundError:
            return None
        if len(blob) < 4 or zlib.crc32(blob[:-4]) != _U32.unpack(blob[-4:])[0]:
            return None
        body = blob[:-4]
        if body[:4] != INDEX_MAGIC:
            return None
        try:
            r = Reader(body, 4)
            if r.u16() != FORMAT_VERSION or r.u64() != ckpt_id or r.u32() != fid:
                return None
            state_kind = r.u8()
            next_seq = r.u64()
            max_seq = r.u64()
            tiny_last_ts = r.i64()
            log_bytes = r.u64()
            col_samples = r.u64()
            schema = self._schemas.get(fid, (None, None))[0]
            parts: dict = {}
            summaries: dict = {}
            legacy_rows: tuple = ()
            tiny: dict = {}
            if state_kind == 0:
                for _ in range(r.u32()):
                    pidx = r.u64()
                    summaries[pidx] = self._decode_summary(r)
                    count = r.u32()
                    cols = Columns()
                    cols.since.frombytes(r._take(count * 8))
                    cols.till.frombytes(r._take(count * 8))
                    cols.seq.frombytes(r._take(count * 8))
                    cols.values = [decode_values(r, schema) for _ in range(count)]
                    parts[pidx] = cols
            elif state_kind == 1:
                rows = []
                for _ in range(r.u32()):
                    since, till, seq = r.u64(), r.u64(), r.u64()
                    rows.append((since, till, seq, decode_values(r, schema)))
                legacy_rows = tuple(rows)
            else:
                typecode = self._schemas.get(fid, (None, "d"))[1] or "d"
                packer = _TS_I64 if typecode == "q" else _TS_F64
                for _ in range(r.u32()):
                    pidx = r.u64()
                    summaries[pidx] = self._decode_summary(r)
                    count = r.u32()
                    tc = TinyColumns(typecode)
                    for _ in range(count):
                        ts, value = packer.unpack(r._take(16))
                        tc.append(ts, value)
                    tiny[pidx] = tc
            offline = {}
            for _ in range(r.u32()):
                pidx = r.u64()
                offline[pidx] = self._decode_summary(r)
        except CorruptStore:
            return None
        self._idx_log_bytes[fid] = log_bytes
        self._idx_col_samples[fid] = col_samples
        return FolderSnapshot(state_kind, next_seq, max_seq, tiny_last_ts,
                              parts, summaries, offline, legacy_rows, tiny)

    # ------------------------------------------------------------------ misc
    def stats(self) -> dict:
        return {
            "backend_commits": self._commits,
            "backend_bytes_written": self._bytes_written,
        }

    def close(self) -> None:
        if self._closed:
            return
        for h in self._logs.values():
            h.close()
        for h in self._cols.values():
            h.close()
        if self._catalog is not None:
            self._catalog.close()
        self._release_lock()
        self._closed = True
