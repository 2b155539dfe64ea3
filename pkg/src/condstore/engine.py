"""Store engine: folder catalog, sessions, store/resolve semantics, tags.

Resolution model: every committed object carries a per-folder strictly
increasing sequence (the version axis). At a time point t under a sequence
ceiling c, the visible object is the one with the greatest seq <= c whose
interval contains t (latest wins). Two store strategies exist per folder:

* layered: immutable append-only layers, resolved at read time by building the
  visible-set tiling (kernel sweep, cached per ceiling). Supports HEAD, tags
  and explicit sequence ceilings.
* legacy: truncate-on-write. Each store scans the whole visible row set and
  rewrites the overlapped portions, keeping rows pairwise disjoint; only HEAD
  reads work. Kept as the benchmark foil for the layered path and deliberately
  implemented as the straightforward full-scan rewrite (O(n) per store).

Concurrency: one update session store-wide; readers work on committed,
append-only state and short-lived snapshots. Structural mutations happen
under one lock; handed-out objects are immutable.
"""

from __future__ import annotations

import threading
import time
from array import array
from bisect import bisect_right
from collections import OrderedDict
from dataclasses import dataclass

from . import kernels
from .errors import (
    AlreadyExists,
    InvalidArgument,
    NoSuchFolder,
    NoSuchParent,
    NoSuchPartition,
    NoSuchTag,
    NoUpdateSession,
    NoValidObject,
    OutOfOrder,
    ParentNotFolderset,
    PartitionOffline,
    ReadOnlyStore,
    SchemaMismatch,
    SequenceInFuture,
    SessionClosed,
    TagExists,
    UnsupportedByStrategy,
    UpdateSessionBusy,
)
from .model import (
    PLUS_INF,
    AttrKind,
    FolderKind,
    FolderNode,
    FolderPath,
    NO_PARTITION,
    PartitionAxis,
    PartitionPolicy,
    PayloadSchema,
    ResolvedObject,
    StoreStrategy,
    TagSnapshot,
    ValidityInterval,
    as_path,
    make_schema,
    validate_payload,
    validate_time,
)
from .partition import partition_index, summary_covers

TILING_CACHE_SIZE = 8


class Columns:
    """Committed object columns of one partition, ascending by seq."""

    __slots__ = ("since", "till", "seq", "values")

    def __init__(self):
        self.since = array("Q")
        self.till = array("Q")
        self.seq = array("Q")
        self.values: list[tuple] = []

    def __len__(self) -> int:
        return len(self.seq)

    def append(self, since: int, till: int, seq: int, values: tuple):
        self.since.append(since)
        self.till.append(till)
        self.seq.append(seq)
        self.values.append(values)


class TinyColumns:
    """Committed (timestamp, value) samples of one tiny partition."""

    __slots__ = ("ts", "vals")

    def __init__(self, typecode: str):
        self.ts = array("Q")
        self.vals = array(typecode)

    def __len__(self) -> int:
        return len(self.ts)

    def append(self, ts: int, value):
        self.ts.append(ts)
        self.vals.append(value)


@dataclass
class Summary:
    """Per-partition digest; survives eviction so pruning stays exact."""

    min_since: int = PLUS_INF
    max_till: int = 0
    min_seq: int = 2**64 - 1
    max_seq: int = 0
    count: int = 0

    def add(self, since: int, till: int, seq: int):
        if since < self.min_since:
            self.min_since = since
        if till > self.max_till:
            self.max_till = till
        if seq < self.min_seq:
            self.min_seq = seq
        if seq > self.max_seq:
            self.max_seq = seq
        self.count += 1


@dataclass
class TinyReading:
    """tiny_read result: the winning sample and its step-function validity."""

    at: int
    value: object
    effective: ValidityInterval


@dataclass
class FolderInfo:
    """describe_folder result."""

    path: FolderPath
    kind: FolderKind
    description: str
    schema: PayloadSchema | None
    strategy: StoreStrategy | None
    policy: PartitionPolicy
    count: int
    max_seq: int


class Tiling:
    """Visible-set segments over a gathered, seq-ascending object snapshot."""

    __slots__ = ("seg_since", "seg_till", "seg_owner", "obj_since", "obj_till", "obj_seq", "obj_values")

    def __init__(self, kernel, obj_since, obj_till, obj_seq, obj_values):
        self.obj_since = obj_since
        self.obj_till = obj_till
        self.obj_seq = obj_seq
        self.obj_values = obj_values
        self.seg_since, self.seg_till, self.seg_owner = kernel.build_tiling(
            obj_since, obj_till, len(obj_seq)
        )

    def locate(self, t: int) -> int | None:
        j = bisect_right(self.seg_since, t) - 1
        if j >= 0 and t < self.seg_till[j]:
            return j
        return None

    def segment(self, folder: FolderPath, j: int, clip_since=None, clip_till=None) -> ResolvedObject:
        i = self.seg_owner[j]
        s, e = self.seg_since[j], self.seg_till[j]
        if clip_since is not None and s < clip_since:
            s = clip_since
        if clip_till is not None and e > clip_till:
            e = clip_till
        return ResolvedObject(
            folder=folder,
            seq=self.obj_seq[i],
            stored=ValidityInterval(self.obj_since[i], self.obj_till[i]),
            effective=ValidityInterval(s, e),
            values=self.obj_values[i],
        )


class FolderState:
    """Mutable committed state of one catalog node."""

    __slots__ = (
        "node", "fid", "next_seq", "max_committed_seq",
        "parts", "summaries", "offline", "residency_epoch",
        "legacy_rows", "tiny", "tiny_last_ts",
        "tiling_cache",
    )

    def __init__(self, node: FolderNode, fid: int):
        self.node = node
        self.fid = fid
        self.next_seq = 1
        self.max_committed_seq = 0
        self.parts: dict[int, Columns] = {}
        self.summaries: dict[int, Summary] = {}
        self.offline: dict[int, Summary] = {}
        self.residency_epoch = 0
        self.legacy_rows: tuple = ()
        self.tiny: dict[int, TinyColumns] = {}
        self.tiny_last_ts = -1
        self.tiling_cache: OrderedDict = OrderedDict()

    @property
    def is_layered(self) -> bool:
        return self.node.strategy is StoreStrategy.LAYERED

    @property
    def tiny_typecode(self) -> str:
        return "q" if self.node.schema.attributes[0][1] is AttrKind.INT64 else "d"

    def object_count(self) -> int:
        if self.node.kind is FolderKind.TINY:
            return sum(len(tc) for tc in self.tiny.values())
        if self.node.strategy is StoreStrategy.LEGACY_TRUNCATE:
            return len(self.legacy_rows)
        return sum(len(c) for c in self.parts.values())

    def partition_digest(self):
        """(pidx, summary, resident) ascending; evicted digests included."""
        rows = [(p, s, True) for p, s in self.summaries.items() if s.count]
        rows.extend((p, s, False) for p, s in self.offline.items())
        rows.sort(key=lambda r: r[0])
        return rows

    def tiny_total(self) -> int:
        """Committed sample count including evicted partitions."""
        return sum(s.count for s in self.summaries.values()) + \
            sum(s.count for s in self.offline.values())


def _legacy_rewrite(rows: list, since: int, till: int, seq: int, values: tuple) -> list:
    """Truncate-on-write: eclipse overlapped portions, keep the set disjoint.

    Full scan by design; this is the legacy store path whose O(n) cost the
    benchmarks contrast against the layered append.
    """
    out = []
    for row in rows:
        s, e = row[0], row[1]
        if e <= since or s >= till:
            out.append(row)
            continue
        if s < since:
            out.append((s, since, row[2], row[3]))
        if e > till:
            out.append((till, e, row[2], row[3]))
    out.append((since, till, seq, values))
    return out


class _PendingFolder:
    """Per-session buffered writes for one folder."""

    __slots__ = ("objects", "tiny", "legacy_work", "seq_counter", "tiny_last_ts")

    def __init__(self):
        self.objects: list[tuple[int, int, int, tuple]] = []  # seq, since, till, values
        self.tiny: list[tuple[int, object]] = []
        self.legacy_work: list | None = None
        self.seq_counter: int | None = None
        self.tiny_last_ts: int | None = None


class UpdateSession:
    """Single store-wide writer; buffered writes become visible at commit."""

    def __init__(self, store: "Store"):
        self._store = store
        self._pending_nodes: list[FolderNode] = []
        self._pending_paths: dict[FolderPath, FolderNode] = {}
        self._pending: dict[FolderPath, _PendingFolder] = {}
        self._order: list[FolderPath] = []
        self._state = "open"

    # -- lifecycle ---------------------------------------------------------
    def _check_open(self):
        if self._state != "open":
            raise SessionClosed(f"update session already {self._state}")

    def commit(self):
        self._check_open()
        self._store._commit_update(self)
        self._state = "committed"

    def abort(self):
        if self._state == "open":
            self._store._abort_update(self)
            self._state = "aborted"

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if self._state == "open":
            if exc_type is None:
                self.commit()
            else:
                self.abort()
        return False

    # -- write surface -----------------------------------------------------
    def create_folderset(self, path, description: str = "") -> FolderNode:
        self._check_open()
        return self._store._create_node_in_session(
            self, as_path(path), FolderKind.FOLDERSET, description, None, NO_PARTITION, None
        )

    def create_folder(self, path, schema, strategy=StoreStrategy.LAYERED,
                      policy: PartitionPolicy | None = None, description: str = "") -> FolderNode:
        self._check_open()
        return self._store._create_node_in_session(
            self, as_path(path), FolderKind.FOLDER, description,
            _coerce_schema(schema), policy or NO_PARTITION, StoreStrategy(strategy)
        )

    def create_tiny_folder(self, path, value_kind="float64",
                           policy: PartitionPolicy | None = None, description: str = "") -> FolderNode:
        self._check_open()
        schema = _tiny_schema(value_kind)
        return self._store._create_node_in_session(
            self, as_path(path), FolderKind.TINY, description, schema, policy or NO_PARTITION, None
        )

    def store_object(self, path, since: int, till: int, values) -> int:
        self._check_open()
        return self._store._store_object(self, as_path(path), since, till, values)

    def tiny_append(self, path, at: int, value) -> None:
        self._check_open()
        self._store._tiny_append(self, as_path(path), at, value)


class ReadSession:
    """Snapshot reader: per-folder ceilings captured at open."""

    def __init__(self, store: "Store"):
        self._store = store
        with store._lock:
            self.folders: dict[FolderPath, tuple] = {}
            for path, fs in store._folders.items():
                if fs.node.kind is FolderKind.TINY:
                    snap = ("tiny", fs.tiny_total())
                elif fs.node.strategy is StoreStrategy.LEGACY_TRUNCATE:
                    snap = ("legacy", fs.legacy_rows)
                else:
                    snap = ("layered", fs.max_committed_seq)
                self.folders[path] = snap
            self.tags = set(store._tags)
        self._closed = False

    def close(self):
        self._closed = True

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False

    def _check(self):
        if self._closed:
            raise SessionClosed("read session is closed")

    # -- read surface (snapshot-clamped) ------------------------------------
    def find_object(self, path, at, tag=None, at_seq=None) -> ResolvedObject:
        self._check()
        return self._store.find_object(path, at, tag=tag, at_seq=at_seq, session=self)

    def browse_objects(self, path, since, till, tag=None, at_seq=None):
        self._check()
        return self._store.browse_objects(path, since, till, tag=tag, at_seq=at_seq, session=self)

    def tiny_read(self, path, at) -> TinyReading:
        self._check()
        return self._store.tiny_read(path, at, session=self)

    def tiny_scan(self, path, since, till):
        self._check()
        return self._store.tiny_scan(path, since, till, session=self)

    def describe_folder(self, path) -> FolderInfo:
        self._check()
        return self._store.describe_folder(path, session=self)

    def list_children(self, path):
        self._check()
        return self._store.list_children(path, session=self)


def _coerce_schema(schema) -> PayloadSchema:
    if isinstance(schema, PayloadSchema):
        return schema
    return make_schema(schema)


def _tiny_schema(value_kind) -> PayloadSchema:
    kind = AttrKind(value_kind)
    if kind not in (AttrKind.FLOAT64, AttrKind.INT64):
        raise InvalidArgument("tiny folders hold a single float64 or int64 value")
    return make_schema([("value", kind)])


class Store:
    """Engine facade over a persistence backend."""

    def __init__(self, backend, kernel: str = "auto"):
        self._backend = backend
        self._kernel = kernels.get_kernel(kernel)
        self._lock = threading.RLock()
        self._folders: dict[FolderPath, FolderState] = {}
        self._children: dict[FolderPath, set[str]] = {}
        self._tags: dict[str, TagSnapshot] = {}
        self._tag_order: list[str] = []
        self._next_fid = 1
        self._update_session: UpdateSession | None = None
        self._closed = False
        self.stats: dict[str, int] = {
            "records_replayed": 0,
            "index_loads": 0,
            "tiling_builds": 0,
            "gathered_objects": 0,
            "commits": 0,
        }
        root = FolderNode(FolderPath(()), FolderKind.FOLDERSET, "root")
        self._folders[root.path] = FolderState(root, 0)
        self._children[root.path] = set()
        backend.load(self)

    # ------------------------------------------------------------------ misc
    @property
    def kernel_name(self) -> str:
        return self._kernel.KERNEL_NAME

    @property
    def readonly(self) -> bool:
        return self._backend.readonly

    def stats_snapshot(self) -> dict[str, int]:
        with self._lock:
            merged = dict(self.stats)
            merged.update(self._backend.stats())
            return merged

    def close(self):
        if self._closed:
            return
        with self._lock:
            if self._update_session is not None:
                self._update_session.abort()
            self._backend.close()
            self._closed = True

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False

    def _check_writable(self):
        if self._closed:
            raise SessionClosed("store is closed")
        if self._backend.readonly:
            raise ReadOnlyStore("store opened read-only")

    # ------------------------------------------------------------- sessions
    def update(self) -> UpdateSession:
        self._check_writable()
        with self._lock:
            if self._update_session is not None:
                raise UpdateSessionBusy("another update session is open")
            session = UpdateSession(self)
            self._update_session = session
            return session

    def read_session(self) -> ReadSession:
        return ReadSession(self)

    def open_session(self, mode: str):
        if mode == "update":
            return self.update()
        if mode == "read":
            return self.read_session()
        raise InvalidArgument(f"unknown session mode {mode!r}")

    def _abort_update(self, session: UpdateSession):
        # an aborted session leaves no trace: the next session reuses its
        # sequence numbers, exactly as a crashed uncommitted session would
        with self._lock:
            if self._update_session is session:
                self._update_session = None

    # ------------------------------------------------------------- creation
    def create_folderset(self, path, description: str = "", session: UpdateSession | None = None) -> FolderNode:
        return self._create_entry(session, as_path(path), FolderKind.FOLDERSET,
                                  description, None, NO_PARTITION, None)

    def create_folder(self, path, schema, strategy=StoreStrategy.LAYERED,
                      policy: PartitionPolicy | None = None, description: str = "",
                      session: UpdateSession | None = None) -> FolderNode:
        return self._create_entry(session, as_path(path), FolderKind.FOLDER, description,
                                  _coerce_schema(schema), policy or NO_PARTITION, StoreStrategy(strategy))

    def create_tiny_folder(self, path, value_kind="float64", policy: PartitionPolicy | None = None,
                           description: str = "", session: UpdateSession | None = None) -> FolderNode:
        schema = _tiny_schema(value_kind)
        return self._create_entry(session, as_path(path), FolderKind.TINY, description,
                                  schema, policy or NO_PARTITION, None)

    def _create_entry(self, session, path, kind, description, schema, policy, strategy):
        if session is not None:
            session._check_open()
            return self._create_node_in_session(session, path, kind, description, schema, policy, strategy)
        own = self.update()
        try:
            node = self._create_node_in_session(own, path, kind, description, schema, policy, strategy)
            own.commit()
            return node
        finally:
            own.abort()  # no-op after commit

    def _create_node_in_session(self, session, path, kind, description, schema, policy, strategy):
        self._check_writable()
        if path.is_root:
            raise AlreadyExists("root always exists")
        if kind is FolderKind.FOLDERSET and policy.axis is not PartitionAxis.NONE:
            raise InvalidArgument("foldersets take no partition policy")
        if kind is FolderKind.TINY and policy.axis is PartitionAxis.VERSION:
            raise InvalidArgument("tiny folders partition on the time axis only")
        if strategy is StoreStrategy.LEGACY_TRUNCATE and policy.axis is not PartitionAxis.NONE:
            raise InvalidArgument("legacy truncate folders do not support partitioning")
        with self._lock:
            if path in self._folders or path in session._pending_paths:
                raise AlreadyExists(f"{path} already exists")
            parent = path.parent()
            parent_node = None
            if parent in self._folders:
                parent_node = self._folders[parent].node
            elif parent in session._pending_paths:
                parent_node = session._pending_paths[parent]
            if parent_node is None:
                raise NoSuchParent(f"parent {parent} does not exist")
            if parent_node.kind is not FolderKind.FOLDERSET:
                raise ParentNotFolderset(f"parent {parent} is a {parent_node.kind.value}")
            node = FolderNode(path, kind, description, schema, policy, strategy)
            session._pending_nodes.append(node)
            session._pending_paths[path] = node
            return node

    # ------------------------------------------------------------- writing
    def store_object(self, path, since: int, till: int, values, session: UpdateSession | None = None) -> int:
        if session is None:
            raise NoUpdateSession("store_object requires an open update session")
        session._check_open()
        return self._store_object(session, as_path(path), since, till, values)

    def _pending_for(self, session, path) -> _PendingFolder:
        pf = session._pending.get(path)
        if pf is None:
            pf = _PendingFolder()
            session._pending[path] = pf
            session._order.append(path)
        return pf

    def _session_node(self, session, path) -> FolderNode:
        fs = self._folders.get(path)
        if fs is not None:
            return fs.node
        node = session._pending_paths.get(path)
        if node is None:
            raise NoSuchFolder(f"{path} does not exist")
        return node

    def _store_object(self, session, path: FolderPath, since, till, values) -> int:
        node = self._session_node(session, path)
        if node.kind is not FolderKind.FOLDER:
            raise NoSuchFolder(f"{path} is a {node.kind.value}, not a data folder")
        interval = ValidityInterval(since, till)
        payload = validate_payload(node.schema, values)
        pf = self._pending_for(session, path)
        if pf.seq_counter is None:
            fs = self._folders.get(path)
            pf.seq_counter = fs.next_seq if fs is not None else 1
        seq = pf.seq_counter
        pf.seq_counter += 1
        if node.strategy is StoreStrategy.LEGACY_TRUNCATE:
            if pf.legacy_work is None:
                fs = self._folders.get(path)
                pf.legacy_work = list(fs.legacy_rows) if fs is not None else []
            pf.legacy_work = _legacy_rewrite(pf.legacy_work, interval.since, interval.till, seq, payload)
        pf.objects.append((seq, interval.since, interval.till, payload))
        return seq

    def tiny_append(self, path, at: int, value, session: UpdateSession | None = None) -> None:
        if session is None:
            raise NoUpdateSession("tiny_append requires an open update session")
        session._check_open()
        self._tiny_append(session, as_path(path), at, value)

    def _tiny_append(self, session, path: FolderPath, at: int, value) -> None:
        node = self._session_node(session, path)
        if node.kind is not FolderKind.TINY:
            raise NoSuchFolder(f"{path} is a {node.kind.value}, not a tiny folder")
        validate_time(at, what="sample timestamp")
        kind = node.schema.attributes[0][1]
        if kind is AttrKind.INT64:
            if not isinstance(value, int) or isinstance(value, bool):
                raise SchemaMismatch(f"tiny folder {path} stores int64, got {value!r}", 0)
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SchemaMismatch(f"tiny folder {path} stores float64, got {value!r}", 0)
            value = float(value)
        pf = self._pending_for(session, path)
        if pf.tiny_last_ts is None:
            fs = self._folders.get(path)
            pf.tiny_last_ts = fs.tiny_last_ts if fs is not None else -1
        if at <= pf.tiny_last_ts:
            raise OutOfOrder(f"sample at {at} is not after the last timestamp {pf.tiny_last_ts}")
        pf.tiny_last_ts = at
        pf.tiny.append((at, value))

    # -------------------------------------------------------------- commit
    def _commit_update(self, session: UpdateSession):
        from .backends.base import CommitGroup

        with self._lock:
            group = CommitGroup()
            new_fids: dict[FolderPath, int] = {}
            for node in session._pending_nodes:
                new_fid = self._next_fid
                self._next_fid += 1
                group.nodes.append((node, new_fid))
                new_fids[node.path] = new_fid
            for path in session._order:
                pf = session._pending[path]
                fs = self._folders.get(path)
                fid = fs.fid if fs is not None else new_fids[path]
                node = fs.node if fs is not None else session._pending_paths[path]
                if pf.objects:
                    group.objects.append((fid, node.schema, list(pf.objects)))
                if pf.tiny:
                    typecode = "q" if node.schema.attributes[0][1] is AttrKind.INT64 else "d"
                    group.tiny.append((fid, typecode, list(pf.tiny)))
                group.counters[fid] = (pf.seq_counter, len(pf.tiny) or None)
            self._backend.commit_group(group)
            # apply to committed in-memory state
            for node, new_fid in group.nodes:
                self._apply_node(node, new_fid)
            for path in session._order:
                pf = session._pending[path]
                fs = self._folders[path]
                if pf.objects:
                    self._apply_objects(fs, pf.objects, legacy_result=pf.legacy_work)
                if pf.tiny:
                    self._apply_tiny(fs, pf.tiny)
                if pf.seq_counter is not None and pf.seq_counter > fs.next_seq:
                    fs.next_seq = pf.seq_counter
            self.stats["commits"] += 1
            if self._update_session is session:
                self._update_session = None

    def _apply_node(self, node: FolderNode, fid: int):
        fs = FolderState(node, fid)
        self._folders[node.path] = fs
        self._children[node.path.parent()].add(node.path.name)
        if node.kind is FolderKind.FOLDERSET:
            self._children[node.path] = set()
        if fid >= self._next_fid:
            self._next_fid = fid + 1

    def _apply_objects(self, fs: FolderState, items, legacy_result=None):
        node = fs.node
        if node.strategy is StoreStrategy.LEGACY_TRUNCATE:
            if legacy_result is None:  # replay path re-runs the rewrites
                work = list(fs.legacy_rows)
                for seq, since, till, values in items:
                    work = _legacy_rewrite(work, since, till, seq, values)
                legacy_result = work
            fs.legacy_rows = tuple(legacy_result)
        else:
            policy = node.policy
            for seq, since, till, values in items:
                pidx = partition_index(policy, since, seq)
                cols = fs.parts.get(pidx)
                if cols is None:
                    cols = fs.parts[pidx] = Columns()
                    fs.summaries[pidx] = Summary()
                cols.append(since, till, seq, values)
                fs.summaries[pidx].add(since, till, seq)
        last_seq = items[-1][0]
        if last_seq > fs.max_committed_seq:
            fs.max_committed_seq = last_seq
        if fs.next_seq <= last_seq:
            fs.next_seq = last_seq + 1

    def _apply_tiny(self, fs: FolderState, samples):
        policy = fs.node.policy
        typecode = fs.tiny_typecode
        for ts, value in samples:
            pidx = partition_index(policy, ts, 0)
            tc = fs.tiny.get(pidx)
            if tc is None:
                tc = fs.tiny[pidx] = TinyColumns(typecode)
                fs.summaries[pidx] = Summary()
            tc.append(ts, value)
            fs.summaries[pidx].add(ts, ts + 1, 0)
            if ts > fs.tiny_last_ts:
                fs.tiny_last_ts = ts

    # ------------------------------------------------------------ recovery
    # The backend replays committed history through these; they reuse the
    # same application code as live commits.
    def recover_node(self, node: FolderNode, fid: int):
        self._apply_node(node, fid)

    def recover_objects(self, fid: int, items):
        self._apply_objects(self._folder_by_fid(fid), items)

    def recover_tiny(self, fid: int, samples):
        self._apply_tiny(self._folder_by_fid(fid), samples)

    def recover_tag(self, tag: TagSnapshot):
        self._tags[tag.name] = tag
        self._tag_order.append(tag.name)

    def recover_counters(self, fid: int, next_seq: int | None, tiny_count: int | None):
        fs = self._folder_by_fid(fid)
        if next_seq is not None and next_seq > fs.next_seq:
            fs.next_seq = next_seq

    def recover_evict(self, fid: int, pidx: int):
        self._drop_partition(self._folder_by_fid(fid), pidx)

    def recover_import(self, fid: int, pidx: int):
        fs = self._folder_by_fid(fid)
        fs.offline.pop(pidx, None)
        fs.residency_epoch += 1
        fs.tiling_cache.clear()

    def recover_folder_snapshot(self, fid: int, snapshot):
        """Checkpoint fast path: bulk state loaded from an index file."""
        fs = self._folder_by_fid(fid)
        snapshot.apply(fs)
        self.stats["index_loads"] += 1

    def count_replayed(self, n: int):
        self.stats["records_replayed"] += n

    def _folder_by_fid(self, fid: int) -> FolderState:
        for fs in self._folders.values():
            if fs.fid == fid:
                return fs
        raise NoSuchFolder(f"no folder with id {fid}")

    def _drop_partition(self, fs: FolderState, pidx: int):
        fs.parts.pop(pidx, None)
        fs.tiny.pop(pidx, None)
        summary = fs.summaries.pop(pidx, None)
        if summary is not None:
            fs.offline[pidx] = summary
        fs.residency_epoch += 1
        fs.tiling_cache.clear()

    # ------------------------------------------------------------- lookups
    def _folder_state(self, path: FolderPath, session: ReadSession | None = None) -> FolderState:
        if self._closed:
            raise SessionClosed("store is closed")
        fs = self._folders.get(path)
        if fs is None:
            raise NoSuchFolder(f"{path} does not exist")
        if session is not None and path not in session.folders and not path.is_root:
            raise NoSuchFolder(f"{path} does not exist in this session's snapshot")
        return fs

    def _data_folder(self, path, session=None, kinds=(FolderKind.FOLDER,)) -> FolderState:
        fs = self._folder_state(as_path(path), session)
        if fs.node.kind not in kinds:
            wanted = " or ".join(k.value for k in kinds)
            raise NoSuchFolder(f"{fs.node.path} is a {fs.node.kind.value}, not a {wanted}")
        return fs

    def describe_folder(self, path, session: ReadSession | None = None) -> FolderInfo:
        fs = self._data_folder(path, session, kinds=(FolderKind.FOLDER, FolderKind.TINY))
        with self._lock:
            count = fs.object_count()
            max_seq = fs.max_committed_seq
            if session is not None:
                snap = session.folders[fs.node.path]
                if snap[0] == "layered":
                    max_seq = snap[1]
                    count = sum(bisect_right(c.seq, max_seq) for c in fs.parts.values())
                elif snap[0] == "legacy":
                    count = len(snap[1])
                elif snap[0] == "tiny":
                    count = min(count, snap[1])
        node = fs.node
        return FolderInfo(node.path, node.kind, node.description, node.schema,
                          node.strategy, node.policy, count, max_seq)

    def list_children(self, path, session: ReadSession | None = None):
        p = as_path(path)
        fs = self._folder_state(p, session)
        if fs.node.kind is not FolderKind.FOLDERSET:
            raise ParentNotFolderset(f"{p} is not a folderset")
        with self._lock:
            names = sorted(self._children.get(p, ()))
        out = []
        for name in names:
            child = p.child(name)
            if session is not None and child not in session.folders:
                continue
            out.append(self._folders[child].node)
        return out

    def walk(self, path="/", session=None):
        """Depth-first (node, depth) traversal of the hierarchy."""
        p = as_path(path)
        root = self._folder_state(p, session).node
        stack = [(root, 0)]
        while stack:
            node, depth = stack.pop()
            yield node, depth
            if node.kind is FolderKind.FOLDERSET:
                children = self.list_children(node.path, session)
                for child in reversed(children):
                    stack.append((child, depth + 1))

    # ------------------------------------------------------------ selectors
    def _ceiling_for(self, fs: FolderState, tag, at_seq, session) -> int:
        if tag is not None and at_seq is not None:
            raise InvalidArgument("use either a tag or an explicit sequence, not both")
        base = fs.max_committed_seq
        if session is not None:
            snap = session.folders.get(fs.node.path)
            if snap is not None and snap[0] == "layered":
                base = snap[1]
        if tag is not None:
            if not fs.is_layered:
                raise UnsupportedByStrategy("tags need a layered folder")
            if session is not None and tag not in session.tags:
                raise NoSuchTag(f"tag {tag!r} does not exist in this session's snapshot")
            with self._lock:
                snapshot = self._tags.get(tag)
            if snapshot is None:
                raise NoSuchTag(f"tag {tag!r} does not exist")
            ceiling = snapshot.ceiling(fs.node.path)
            ceiling = 0 if ceiling is None else ceiling
            return min(ceiling, base)
        if at_seq is not None:
            if not fs.is_layered:
                raise UnsupportedByStrategy("sequence ceilings need a layered folder")
            if not isinstance(at_seq, int) or isinstance(at_seq, bool) or at_seq < 0:
                raise InvalidArgument(f"bad sequence ceiling {at_seq!r}")
            return min(at_seq, base)
        return base

    # ------------------------------------------------- partition gathering
    def _required_parts(self, fs: FolderState, lo: int, hi: int, ceiling: int) -> tuple[int, ...]:
        """Partitions whose objects could matter for [lo, hi) under ceiling.

        Raises PartitionOffline when an evicted partition is required; the
        surviving summaries bound the check so untouched partitions cost
        nothing to skip.
        """
        for pidx, summary in fs.offline.items():
            if summary.count and summary.min_seq <= ceiling and summary_covers(summary, lo, hi):
                raise PartitionOffline(
                    f"partition {pidx} of {fs.node.path} is evicted but required"
                )
        needed = []
        for pidx, summary in fs.summaries.items():
            if summary.count == 0 or summary.min_seq > ceiling:
                continue
            if summary_covers(summary, lo, hi):
                needed.append(pidx)
        needed.sort()
        return tuple(needed)

    def _gather(self, fs: FolderState, ceiling: int, parts: tuple[int, ...]):
        self.stats["tiling_builds"] += 1
        if len(parts) == 1:
            cols = fs.parts[parts[0]]
            m = bisect_right(cols.seq, ceiling)
            self.stats["gathered_objects"] += m
            since = array("Q")
            since.frombytes(bytes(memoryview(cols.since)[:m]))
            till = array("Q")
            till.frombytes(bytes(memoryview(cols.till)[:m]))
            seq = array("Q")
            seq.frombytes(bytes(memoryview(cols.seq)[:m]))
            return since, till, seq, cols.values[:m]
        rows = []
        for pidx in parts:
            cols = fs.parts[pidx]
            m = bisect_right(cols.seq, ceiling)
            self.stats["gathered_objects"] += m
            for i in range(m):
                rows.append((cols.seq[i], cols.since[i], cols.till[i], cols.values[i]))
        rows.sort()
        since = array("Q", (r[1] for r in rows))
        till = array("Q", (r[2] for r in rows))
        seq = array("Q", (r[0] for r in rows))
        values = [r[3] for r in rows]
        return since, till, seq, values

    def _tiling_for(self, fs: FolderState, ceiling: int, parts: tuple[int, ...]) -> Tiling:
        key = (ceiling, fs.residency_epoch, parts)
        with self._lock:
            cached = fs.tiling_cache.get(key)
            if cached is not None:
                fs.tiling_cache.move_to_end(key)
                return cached
            since, till, seq, values = self._gather(fs, ceiling, parts)
        tiling = Tiling(self._kernel, since, till, seq, values)
        with self._lock:
            fs.tiling_cache[key] = tiling
            while len(fs.tiling_cache) > TILING_CACHE_SIZE:
                fs.tiling_cache.popitem(last=False)
        return tiling

    # -------------------------------------------------------------- reading
    def find_object(self, path, at: int, tag=None, at_seq=None,
                    session: ReadSession | None = None) -> ResolvedObject:
        fs = self._data_folder(path, session)
        validate_time(at, what="query time")
        ceiling = self._ceiling_for(fs, tag, at_seq, session)
        if fs.node.strategy is StoreStrategy.LEGACY_TRUNCATE:
            rows = fs.legacy_rows
            if session is not None:
                rows = session.folders[fs.node.path][1]
            for s, e, seq, values in rows:
                if s <= at < e:
                    iv = ValidityInterval(s, e)
                    return ResolvedObject(fs.node.path, seq, iv, iv, values)
            raise NoValidObject(f"no object in {fs.node.path} covers {at}")
        with self._lock:
            parts1 = self._required_parts(fs, at, at + 1, ceiling)
        if not parts1:
            raise NoValidObject(f"no object in {fs.node.path} covers {at}")
        tiling = self._tiling_for(fs, ceiling, parts1)
        j = tiling.locate(at)
        if j is None:
            raise NoValidObject(f"no object in {fs.node.path} covers {at}")
        owner = tiling.seg_owner[j]
        w_since, w_till = tiling.obj_since[owner], tiling.obj_till[owner]
        with self._lock:
            parts2 = self._required_parts(fs, w_since, w_till, ceiling)
        if set(parts2) - set(parts1):
            merged = tuple(sorted(set(parts1) | set(parts2)))
            tiling = self._tiling_for(fs, ceiling, merged)
            j = tiling.locate(at)
            assert j is not None
        return tiling.segment(fs.node.path, j)

    def browse_objects(self, path, since: int, till: int, tag=None, at_seq=None,
                       session: ReadSession | None = None):
        fs = self._data_folder(path, session)
        window = ValidityInterval(since, till)
        ceiling = self._ceiling_for(fs, tag, at_seq, session)
        if fs.node.strategy is StoreStrategy.LEGACY_TRUNCATE:
            rows = fs.legacy_rows
            if session is not None:
                rows = session.folders[fs.node.path][1]
            hits = sorted(r for r in rows if r[0] < window.till and r[1] > window.since)
            out = []
            for s, e, seq, values in hits:
                iv = ValidityInterval(s, e)
                clipped = ValidityInterval(max(s, window.since), min(e, window.till))
                out.append(ResolvedObject(fs.node.path, seq, iv, clipped, values))
            return iter(out)
        with self._lock:
            parts = self._required_parts(fs, window.since, window.till, ceiling)
        if not parts:
            return iter(())
        tiling = self._tiling_for(fs, ceiling, parts)
        out = []
        start = bisect_right(tiling.seg_till, window.since)
        for j in range(start, len(tiling.seg_since)):
            if tiling.seg_since[j] >= window.till:
                break
            out.append(tiling.segment(fs.node.path, j, window.since, window.till))
        return iter(out)

    # ----------------------------------------------------------------- tiny
    def _tiny_folder(self, path, session) -> FolderState:
        return self._data_folder(path, session, kinds=(FolderKind.TINY,))

    def _tiny_ceiling(self, fs, session) -> int:
        if session is not None:
            snap = session.folders.get(fs.node.path)
            if snap is not None and snap[0] == "tiny":
                return snap[1]
        return fs.tiny_total()

    def _tiny_digest(self, fs: FolderState, limit: int):
        """Ascending (pidx, visible_count, min_ts, resident) under a ceiling.

        Sample order is timestamp order, which on the time axis is also
        partition order, so the first `limit` committed samples fill the
        partitions left to right.
        """
        rows = []
        remaining = limit
        for pidx, summary, resident in fs.partition_digest():
            take = summary.count if remaining >= summary.count else max(remaining, 0)
            rows.append((pidx, take, summary.min_since, resident))
            remaining -= summary.count
        return rows

    def tiny_read(self, path, at: int, session: ReadSession | None = None) -> TinyReading:
        fs = self._tiny_folder(path, session)
        validate_time(at, what="query time")
        limit = self._tiny_ceiling(fs, session)
        with self._lock:
            digest = self._tiny_digest(fs, limit)
            hit = self._tiny_locate(fs, digest, at)
            if hit is None:
                raise NoValidObject(f"no sample in {fs.node.path} at or before {at}")
            row, i = hit
            tc = fs.tiny[digest[row][0]]
            ts, value = tc.ts[i], tc.vals[i]
            eff_till = self._tiny_next_ts(fs, digest, row, i)
        return TinyReading(ts, value, ValidityInterval(ts, eff_till))

    def _tiny_locate(self, fs, digest, at):
        """Row+index of the greatest visible sample <= at, or None."""
        for row in range(len(digest) - 1, -1, -1):
            pidx, take, min_ts, resident = digest[row]
            if take <= 0 or min_ts > at:
                continue
            if not resident:
                raise PartitionOffline(
                    f"partition {pidx} of {fs.node.path} is evicted but required"
                )
            tc = fs.tiny[pidx]
            i = bisect_right(tc.ts, at, 0, take) - 1
            return (row, i)  # min_ts <= at guarantees i >= 0
        return None

    def _tiny_next_ts(self, fs, digest, row, i) -> int:
        pidx, take, _, _ = digest[row]
        if i + 1 < take:
            return fs.tiny[pidx].ts[i + 1]
        for later in range(row + 1, len(digest)):
            if digest[later][1] > 0:
                # min_ts is the first sample's timestamp, known even offline
                return digest[later][2]
        return PLUS_INF

    def tiny_scan(self, path, since: int, till: int, session: ReadSession | None = None):
        fs = self._tiny_folder(path, session)
        window = ValidityInterval(since, till)
        limit = self._tiny_ceiling(fs, session)
        out = []
        with self._lock:
            digest = self._tiny_digest(fs, limit)
            hit = self._tiny_locate(fs, digest, window.since)
            start_row, start_i = hit if hit is not None else (0, 0)
            for row in range(start_row, len(digest)):
                pidx, take, min_ts, resident = digest[row]
                if take <= 0:
                    break
                if min_ts >= window.till and row != start_row:
                    break
                if not resident:
                    raise PartitionOffline(
                        f"partition {pidx} of {fs.node.path} is evicted but required"
                    )
                tc = fs.tiny[pidx]
                first = start_i if row == start_row else 0
                for i in range(first, take):
                    if tc.ts[i] >= window.till:
                        return iter(out)
                    out.append((tc.ts[i], tc.vals[i]))
        return iter(out)

    # ----------------------------------------------------------------- tags
    def tag_head(self, name: str, paths) -> TagSnapshot:
        self._check_writable()
        folders = [as_path(p) for p in paths]
        if not folders:
            raise InvalidArgument("a tag needs at least one folder")
        with self._lock:
            if name in self._tags:
                raise TagExists(f"tag {name!r} already exists")
            entries = []
            for p in folders:
                fs = self._folders.get(p)
                if fs is None or fs.node.kind is not FolderKind.FOLDER:
                    raise NoSuchFolder(f"{p} is not a data folder")
                if not fs.is_layered:
                    raise UnsupportedByStrategy(f"{p} uses the legacy strategy; tags need layered")
                entries.append((p, fs.max_committed_seq))
            return self._commit_tag(name, entries)

    def tag_at_sequence(self, name: str, entries) -> TagSnapshot:
        """Pin explicit sequence ceilings; entries is {path: seq} or pairs."""
        self._check_writable()
        if isinstance(entries, dict):
            pairs = [(as_path(p), s) for p, s in entries.items()]
        else:
            pairs = [(as_path(p), s) for p, s in entries]
        if not pairs:
            raise InvalidArgument("a tag needs at least one folder")
        with self._lock:
            if name in self._tags:
                raise TagExists(f"tag {name!r} already exists")
            for p, seq in pairs:
                fs = self._folders.get(p)
                if fs is None or fs.node.kind is not FolderKind.FOLDER:
                    raise NoSuchFolder(f"{p} is not a data folder")
                if not fs.is_layered:
                    raise UnsupportedByStrategy(f"{p} uses the legacy strategy; tags need layered")
                if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
                    raise InvalidArgument(f"bad sequence {seq!r}")
                if seq > fs.max_committed_seq:
                    raise SequenceInFuture(
                        f"sequence {seq} is beyond the committed head {fs.max_committed_seq}"
                    )
            return self._commit_tag(name, pairs)

    def _commit_tag(self, name, entries) -> TagSnapshot:
        from .backends.base import CommitGroup

        tag = TagSnapshot(name, tuple(entries), time.time_ns())
        group = CommitGroup()
        group.tags.append((tag, [(self._folders[p].fid, seq) for p, seq in entries]))
        self._backend.commit_group(group)
        self._tags[name] = tag
        self._tag_order.append(name)
        return tag

    def list_tags(self):
        with self._lock:
            return [self._tags[name] for name in self._tag_order]

    def resolve_tag(self, name: str) -> TagSnapshot:
        with self._lock:
            tag = self._tags.get(name)
        if tag is None:
            raise NoSuchTag(f"tag {name!r} does not exist")
        return tag

    # ------------------------------------------------------------ partitions
    def export_partition(self, path, pidx: int, dest):
        from .partition import export_chunk

        fs = self._data_folder(path, kinds=(FolderKind.FOLDER, FolderKind.TINY))
        with self._lock:
            return export_chunk(fs, pidx, dest)

    def evict_partition(self, path, pidx: int):
        from .backends.base import CommitGroup

        self._check_writable()
        fs = self._data_folder(path, kinds=(FolderKind.FOLDER, FolderKind.TINY))
        with self._lock:
            if self._update_session is not None:
                raise UpdateSessionBusy("partition motion needs the writer role")
            if fs.node.policy.axis is PartitionAxis.NONE:
                raise NoSuchPartition(f"{fs.node.path} is not partitioned")
            if pidx in fs.offline:
                raise PartitionOffline(f"partition {pidx} of {fs.node.path} is already evicted")
            summary = fs.summaries.get(pidx)
            if summary is None or summary.count == 0:
                raise NoSuchPartition(f"{fs.node.path} has no partition {pidx}")
            group = CommitGroup()
            group.evicts.append((fs.fid, pidx))
            self._backend.commit_group(group)
            self._drop_partition(fs, pidx)

    def import_partition(self, path, source):
        from .partition import import_chunk

        self._check_writable()
        fs = self._data_folder(path, kinds=(FolderKind.FOLDER, FolderKind.TINY))
        with self._lock:
            if self._update_session is not None:
                raise UpdateSessionBusy("partition motion needs the writer role")
            return import_chunk(self, fs, source)

    def partition_residency(self, path):
        """(pidx, count, resident) rows for inspection."""
        fs = self._data_folder(path, kinds=(FolderKind.FOLDER, FolderKind.TINY))
        with self._lock:
            return [(p, s.count, resident) for p, s, resident in fs.partition_digest()]

    # ------------------------------------------------------------ checkpoint
    def checkpoint(self):
        self._check_writable()
        with self._lock:
            if self._update_session is not None:
                raise UpdateSessionBusy("checkpoint needs no open update session")
            self._backend.checkpoint(self)
