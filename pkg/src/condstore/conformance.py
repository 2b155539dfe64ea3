"""Differential conformance harness.

Runs a seeded random operation script against two stores in lockstep and
compares every outcome, errors included. The generator consults only its own
pools and the agreed history, so as long as the stores agree they execute the
identical script; the first divergence is reported with the op that caused it.

Three pairings matter in practice: memory vs file (persistence honesty,
including mid-script reopen and checkpoint), pure vs compiled kernel, and
partitioned vs unpartitioned (partitioning must be invisible to readers).
"""

from __future__ import annotations

import io
import random
import shutil
import struct
import tempfile
import zlib
from dataclasses import dataclass, field

from .backends.filestore import FileBackend
from .backends.memory import MemoryBackend
from .engine import FolderInfo, Store
from .errors import CondStoreError
from .model import (
    PLUS_INF,
    FolderNode,
    ResolvedObject,
    TagSnapshot,
    ValidityInterval,
    parse_partition_policy,
    parse_schema,
)

__all__ = [
    "ConformanceReport",
    "FileFactory",
    "MemoryFactory",
    "SeedOutcome",
    "run_pair",
]

_SCHEMAS = (
    "x:int64",
    "v:float64,ch:int32",
    "name:string,raw:blob",
    "ok:bool,xs:int32[],t:float32",
)
_POLICIES = (None, None, "time:256", "time:900", "version:16", "version:50")
_TINY_POLICIES = (None, "time:256", "time:900", "version:16")
_NAMES = ("alpha", "beta", "gamma", "delta", "mu")
_TAGNAMES = ("t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7")


class MemoryFactory:
    """In-memory stores; reopen is an intentional no-op (nothing to reload)."""

    def __init__(self, kernel: str = "auto", policy_map=None):
        self.kernel = kernel
        self.policy_map = policy_map or (lambda p: p)

    def create(self) -> Store:
        return Store(MemoryBackend(), kernel=self.kernel)

    def reopen(self, store: Store) -> Store:
        return store

    def destroy(self, store: Store):
        store.close()


class FileFactory:
    """On-disk stores in throwaway directories; reopen reloads from disk.

    Commits run unsynced here: crash durability has its own tests, and the
    conformance scripts only care about logical equivalence.
    """

    def __init__(self, kernel: str = "auto", policy_map=None):
        self.kernel = kernel
        self.policy_map = policy_map or (lambda p: p)
        self._roots: dict[int, str] = {}

    def create(self) -> Store:
        root = tempfile.mkdtemp(prefix="condstore-conf-")
        store = Store(FileBackend(root, create=True, sync=False), kernel=self.kernel)
        self._roots[id(store)] = root
        return store

    def reopen(self, store: Store) -> Store:
        root = self._roots.pop(id(store))
        store.close()
        reopened = Store(FileBackend(root, sync=False), kernel=self.kernel)
        self._roots[id(reopened)] = root
        return reopened

    def destroy(self, store: Store):
        root = self._roots.pop(id(store), None)
        store.close()
        if root is not None:
            shutil.rmtree(root, ignore_errors=True)


@dataclass
class SeedOutcome:
    seed: int
    ops: int
    mismatch: str | None = None


@dataclass
class ConformanceReport:
    pair: str
    outcomes: list[SeedOutcome] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(o.mismatch is None for o in self.outcomes)

    @property
    def ops_total(self) -> int:
        return sum(o.ops for o in self.outcomes)

    def render(self) -> str:
        lines = [f"conformance {self.pair}: {len(self.outcomes)} seeds, {self.ops_total} ops"]
        for o in self.outcomes:
            if o.mismatch:
                lines.append(f"  seed {o.seed}: MISMATCH {o.mismatch}")
        if self.ok:
            lines.append("  all seeds agree")
        return "\n".join(lines)


def _norm(x):
    """Deterministic, comparison-safe shape for any public result."""
    if isinstance(x, ResolvedObject):
        return (
            "obj",
            str(x.folder),
            x.seq,
            x.stored.since,
            x.stored.till,
            x.effective.since,
            x.effective.till,
            _norm(x.values),
        )
    if hasattr(x, "at") and hasattr(x, "effective"):  # TinyReading
        return ("tiny", x.at, _norm(x.value), x.effective.since, x.effective.till)
    if isinstance(x, FolderInfo):
        return (
            "info",
            str(x.path),
            str(x.kind.value),
            None if x.strategy is None else x.strategy.value,
            x.count,
            x.max_seq,
        )
    if isinstance(x, FolderNode):
        # the partition policy is an implementation knob, not reader-visible
        return (
            "node",
            str(x.path),
            x.kind.value,
            x.description,
            None if x.schema is None else x.schema.render(),
            None if x.strategy is None else x.strategy.value,
        )
    if isinstance(x, TagSnapshot):
        return ("tag", x.name, tuple((str(p), s) for p, s in x.entries))
    if isinstance(x, ValidityInterval):
        return ("iv", x.since, x.till)
    if isinstance(x, float):
        return ("f", struct.pack("<d", x).hex())
    if isinstance(x, (bytes, bytearray)):
        return ("b", len(x), zlib.crc32(x))
    if isinstance(x, dict):
        return tuple(sorted((k, _norm(v)) for k, v in x.items()))
    if isinstance(x, (list, tuple)) or hasattr(x, "__next__"):
        return tuple(_norm(v) for v in x)
    return x


class _Side:
    def __init__(self, factory):
        self.factory = factory
        self.store = factory.create()
        self.update = None
        self.reads: dict[int, object] = {}
        self.chunks: dict[int, bytes] = {}

    def close_sessions(self):
        if self.update is not None:
            self.update.abort()
            self.update = None
        for rs in self.reads.values():
            rs.close()
        self.reads.clear()

    def run(self, op):
        """Execute one op; CondStoreError subclasses are outcomes, not crashes."""
        try:
            return ("ok", _norm(self._dispatch(op)))
        except CondStoreError as exc:
            return ("err", type(exc).__name__)

    def _reader(self, rid):
        if rid is not None and rid in self.reads:
            return self.reads[rid]
        return self.store

    def _dispatch(self, op):
        kind = op[0]
        st = self.store
        if kind == "mkset":
            _, path, desc = op
            return st.create_folderset(path, description=desc, session=self.update)
        if kind == "mkfolder":
            _, path, schema, strategy, policy = op
            policy = self.factory.policy_map(policy)
            return st.create_folder(
                path,
                schema=parse_schema(schema),
                strategy=strategy,
                policy=parse_partition_policy(policy) if policy else None,
                session=self.update,
            )
        if kind == "mktiny":
            _, path, vkind, policy = op
            policy = self.factory.policy_map(policy)
            return st.create_tiny_folder(
                path,
                value_kind=vkind,
                policy=parse_partition_policy(policy) if policy else None,
                session=self.update,
            )
        if kind == "open_update":
            self.update = st.update()
            return "update-open"
        if kind == "commit":
            if self.update is None:
                return "no-session"
            try:
                self.update.commit()
            finally:
                self.update = None
            return "committed"
        if kind == "abort":
            if self.update is None:
                return "no-session"
            self.update.abort()
            self.update = None
            return "aborted"
        if kind == "store":
            _, path, since, till, values = op
            return st.store_object(path, since, till, values, session=self.update)
        if kind == "tinyapp":
            _, path, at, value = op
            return st.tiny_append(path, at, value, session=self.update)
        if kind == "find":
            _, rid, path, at, tag, at_seq = op
            return self._reader(rid).find_object(path, at, tag=tag, at_seq=at_seq)
        if kind == "browse":
            _, rid, path, since, till, tag, at_seq = op
            return list(self._reader(rid).browse_objects(path, since, till, tag=tag, at_seq=at_seq))
        if kind == "tinyread":
            _, rid, path, at = op
            return self._reader(rid).tiny_read(path, at)
        if kind == "tinyscan":
            _, rid, path, since, till = op
            return list(self._reader(rid).tiny_scan(path, since, till))
        if kind == "describe":
            _, rid, path = op
            return self._reader(rid).describe_folder(path)
        if kind == "children":
            _, rid, path = op
            return [(str(n.path), n.kind.value) for n in self._reader(rid).list_children(path)]
        if kind == "walk":
            return [(str(node.path), depth) for node, depth in st.walk()]
        if kind == "taghead":
            _, name, paths = op
            return st.tag_head(name, paths)
        if kind == "tagat":
            _, name, entries = op
            return st.tag_at_sequence(name, entries)
        if kind == "tags":
            return st.list_tags()
        if kind == "resolvetag":
            _, name = op
            return st.resolve_tag(name)
        if kind == "export":
            _, handle, path, pidx = op
            buf = io.BytesIO()
            count = st.export_partition(path, pidx, buf)
            self.chunks[handle] = buf.getvalue()
            return (count, zlib.crc32(self.chunks[handle]))
        if kind == "evict":
            _, path, pidx = op
            return st.evict_partition(path, pidx)
        if kind == "import":
            _, handle, path = op
            data = self.chunks.get(handle)
            if data is None:
                return "no-chunk"
            return st.import_partition(path, io.BytesIO(data))
        if kind == "residency":
            _, path = op
            return st.partition_residency(path)
        if kind == "open_read":
            _, rid = op
            self.reads[rid] = self.store.read_session()
            return "read-open"
        if kind == "close_read":
            _, rid = op
            rs = self.reads.pop(rid, None)
            if rs is None:
                return "no-reader"
            rs.close()
            return "read-closed"
        if kind == "checkpoint":
            st.checkpoint()
            return "checkpointed"
        if kind == "reopen":
            self.close_sessions()
            self.store = self.factory.reopen(self.store)
            return "reopened"
        raise AssertionError(f"unknown op {kind!r}")


class _Script:
    """Stateful op generator; its pools advance only on agreed outcomes."""

    def __init__(self, seed: int, partition_ops: bool, valid_policies_only: bool = False):
        self.rng = random.Random(seed)
        self.partition_ops = partition_ops
        self.valid_policies_only = valid_policies_only
        self.foldersets = ["/"]
        self.folders: list[dict] = []  # committed data/tiny folders
        self.pending: list[dict] = []  # created in the open update session
        self.tags: list[str] = []
        self.update_open = False
        self.readers: list[int] = []
        self.next_rid = 0
        self.next_handle = 0
        self.handles: list[tuple[int, str]] = []  # (handle, folder path)
        self.tiny_ts: dict[str, int] = {}

    # -- pools and value helpers -----------------------------------------------------------
    def _path_pool(self, kinds=("folder",)):
        pool = [f for f in self.folders + self.pending if f["kind"] in kinds]
        return pool

    def _some_folder(self, kinds=("folder",)):
        pool = self._path_pool(kinds)
        if pool and self.rng.random() < 0.92:
            return self.rng.choice(pool)["path"]
        return self.rng.choice(["/missing", "/det/none", "/"])

    def _fresh_path(self):
        parent = self.rng.choice(self.foldersets)
        name = self.rng.choice(_NAMES) + str(self.rng.randrange(6))
        return ("/" if parent == "/" else parent + "/") + name

    def _values_for(self, schema: str, valid: bool):
        rng = self.rng
        out = []
        for part in schema.split(","):
            kind = part.split(":")[1]
            if kind == "int64":
                out.append(rng.randrange(-(2**40), 2**40))
            elif kind == "int32":
                out.append(rng.randrange(-(2**31), 2**31))
            elif kind == "float64":
                out.append(rng.uniform(-1e6, 1e6))
            elif kind == "float32":
                out.append(rng.uniform(-1e3, 1e3))
            elif kind == "string":
                out.append(rng.choice(("", "on", "off", "désactivé", "x" * 40)))
            elif kind == "blob":
                out.append(bytes(rng.randrange(256) for _ in range(rng.randrange(0, 24))))
            elif kind == "bool":
                out.append(rng.random() < 0.5)
            elif kind == "int32[]":
                out.append([rng.randrange(-1000, 1000) for _ in range(rng.randrange(0, 5))])
            else:
                raise AssertionError(kind)
        if not valid:
            spot = rng.randrange(len(out) + 1)
            if spot == len(out):
                out.append(0)  # arity
            else:
                out[spot] = object()
        return tuple(out)

    def _selector(self):
        r = self.rng.random()
        if r < 0.15 and self.tags:
            return self.rng.choice(self.tags), None
        if r < 0.18:
            return "ghost-tag", None
        if r < 0.35:
            return None, self.rng.randrange(0, 40)
        return None, None

    def _rid(self):
        if self.readers and self.rng.random() < 0.5:
            return self.rng.choice(self.readers)
        return None

    def _window(self):
        lo = self.rng.randrange(0, 4000)
        return lo, lo + self.rng.randrange(1, 2500)

    # -- op generation -------------------------------------------------------
    def next_op(self):
        rng = self.rng
        menu = [
            (3, "mkset"), (6, "mkfolder"), (3, "mktiny"),
            (6, "open_update"), (5, "commit"), (2, "abort"),
            (22, "store"), (12, "tinyapp"),
            (16, "find"), (6, "browse"),
            (7, "tinyread"), (3, "tinyscan"),
            (3, "taghead"), (1, "tagat"), (1, "tags"), (1, "resolvetag"),
            (3, "describe"), (2, "children"), (1, "walk"),
            (2, "open_read"), (1, "close_read"),
            (1, "checkpoint"), (1, "reopen"),
        ]
        if self.partition_ops:
            menu += [(2, "export"), (2, "evict"), (2, "import"), (1, "residency")]
        total = sum(w for w, _ in menu)
        pick = rng.randrange(total)
        for w, name in menu:
            pick -= w
            if pick < 0:
                break
        return getattr(self, "_gen_" + name)()

    def _gen_mkset(self):
        return ("mkset", self._fresh_path(), rng_desc(self.rng))

    def _gen_mkfolder(self):
        strategy = "legacy" if self.rng.random() < 0.15 else "layered"
        policy = self.rng.choice(_POLICIES)
        if strategy == "legacy" and (self.valid_policies_only or self.rng.random() < 0.9):
            policy = None
        return ("mkfolder", self._fresh_path(), self.rng.choice(_SCHEMAS), strategy, policy)

    def _gen_mktiny(self):
        pool = _TINY_POLICIES
        if self.valid_policies_only:
            pool = tuple(p for p in pool if p is None or p.startswith("time:"))
        return (
            "mktiny",
            self._fresh_path(),
            self.rng.choice(("int64", "float64")),
            self.rng.choice(pool),
        )

    def _gen_open_update(self):
        return ("open_update",)

    def _gen_commit(self):
        return ("commit",)

    def _gen_abort(self):
        return ("abort",)

    def _gen_store(self):
        f = None
        pool = self._path_pool(("folder",))
        if pool and self.rng.random() < 0.94:
            f = self.rng.choice(pool)
        path = f["path"] if f else self._some_folder(("folder", "tiny"))
        since = self.rng.randrange(0, 4000)
        till = since + self.rng.randrange(1, 700)
        r = self.rng.random()
        if r < 0.04:
            till = since - self.rng.randrange(0, 5)  # invalid interval
        elif r < 0.10:
            till = PLUS_INF
        elif r < 0.13:
            since = 0
        valid = self.rng.random() > 0.06
        schema = f["schema"] if f else _SCHEMAS[0]
        return ("store", path, since, till, self._values_for(schema, valid))

    def _gen_tinyapp(self):
        path = self._some_folder(("tiny",))
        last = self.tiny_ts.get(path, -1)
        if self.rng.random() < 0.08:
            at = max(0, last - self.rng.randrange(0, 10))  # likely out of order
        else:
            at = last + self.rng.randrange(1, 60)
        pool = [f for f in self.folders + self.pending if f["path"] == path]
        vkind = pool[0]["tiny_kind"] if pool else "int64"
        if self.rng.random() < 0.04:
            value = "bad"
        elif vkind == "int64":
            value = self.rng.randrange(-(2**50), 2**50)
        else:
            value = self.rng.uniform(-1e9, 1e9)
        return ("tinyapp", path, at, value)

    def _gen_find(self):
        tag, at_seq = self._selector()
        return ("find", self._rid(), self._some_folder(("folder",)), self.rng.randrange(0, 5000), tag, at_seq)

    def _gen_browse(self):
        tag, at_seq = self._selector()
        lo, hi = self._window()
        return ("browse", self._rid(), self._some_folder(("folder",)), lo, hi, tag, at_seq)

    def _gen_tinyread(self):
        return ("tinyread", self._rid(), self._some_folder(("tiny",)), self.rng.randrange(0, 5000))

    def _gen_tinyscan(self):
        lo, hi = self._window()
        return ("tinyscan", self._rid(), self._some_folder(("tiny",)), lo, hi)

    def _gen_taghead(self):
        name = self.rng.choice(_TAGNAMES)
        count = self.rng.randrange(1, 4)
        paths = [self._some_folder(("folder",)) for _ in range(count)]
        return ("taghead", name, paths)

    def _gen_tagat(self):
        name = self.rng.choice(_TAGNAMES)
        count = self.rng.randrange(1, 3)
        entries = [
            (self._some_folder(("folder",)), self.rng.randrange(0, 30)) for _ in range(count)
        ]
        return ("tagat", name, entries)

    def _gen_tags(self):
        return ("tags",)

    def _gen_resolvetag(self):
        if self.tags and self.rng.random() < 0.8:
            return ("resolvetag", self.rng.choice(self.tags))
        return ("resolvetag", "ghost-tag")

    def _gen_describe(self):
        return ("describe", self._rid(), self._some_folder(("folder", "tiny", "set")))

    def _gen_children(self):
        return ("children", self._rid(), self.rng.choice(self.foldersets))

    def _gen_walk(self):
        return ("walk",)

    def _gen_open_read(self):
        rid = self.next_rid
        self.next_rid += 1
        return ("open_read", rid)

    def _gen_close_read(self):
        rid = self.rng.choice(self.readers) if self.readers else 999
        return ("close_read", rid)

    def _gen_checkpoint(self):
        return ("checkpoint",)

    def _gen_reopen(self):
        return ("reopen",)

    def _gen_export(self):
        handle = self.next_handle
        self.next_handle += 1
        return ("export", handle, self._some_folder(("folder", "tiny")), self.rng.randrange(0, 8))

    def _gen_evict(self):
        return ("evict", self._some_folder(("folder", "tiny")), self.rng.randrange(0, 8))

    def _gen_import(self):
        if self.handles and self.rng.random() < 0.85:
            handle, path = self.rng.choice(self.handles)
            if self.rng.random() < 0.1:
                path = self._some_folder(("folder", "tiny"))
            return ("import", handle, path)
        return ("import", 9999, self._some_folder(("folder", "tiny")))

    def _gen_residency(self):
        return ("residency", self._some_folder(("folder", "tiny")))

    # -- pool advancement on agreement ----------------------------------------
    def observe(self, op, outcome):
        kind = op[0]
        ok = outcome[0] == "ok"
        if kind == "open_update" and ok:
            self.update_open = True
        elif kind in ("commit", "abort"):
            if self.update_open and outcome[1] in ("committed", "aborted"):
                if outcome[1] == "committed":
                    self.folders.extend(self.pending)
                    self.foldersets.extend(
                        f["path"] for f in self.pending if f["kind"] == "set"
                    )
                self.pending.clear()
                self.update_open = False
        elif kind == "mkset" and ok:
            entry = {"path": op[1], "kind": "set"}
            if self.update_open:
                self.pending.append(entry)
            else:
                self.folders.append(entry)
                self.foldersets.append(op[1])
        elif kind == "mkfolder" and ok:
            entry = {
                "path": op[1], "kind": "folder", "schema": op[2],
                "strategy": op[3], "policy": op[4],
            }
            (self.pending if self.update_open else self.folders).append(entry)
        elif kind == "mktiny" and ok:
            entry = {"path": op[1], "kind": "tiny", "tiny_kind": op[2], "policy": op[3]}
            (self.pending if self.update_open else self.folders).append(entry)
        elif kind == "tinyapp" and ok:
            self.tiny_ts[op[1]] = max(self.tiny_ts.get(op[1], -1), op[2])
        elif kind in ("taghead", "tagat") and ok:
            self.tags.append(op[1])
        elif kind == "open_read" and ok:
            self.readers.append(op[1])
        elif kind == "close_read":
            if op[1] in self.readers:
                self.readers.remove(op[1])
        elif kind == "reopen":
            self.update_open = False
            self.pending.clear()
            self.readers.clear()
        elif kind == "export" and ok:
            self.handles.append((op[1], op[2]))


def rng_desc(rng) -> str:
    return rng.choice(("", "calibration", "monitoring stream", "π ≈ 3.14159"))


def run_pair(
    factory_a,
    factory_b,
    *,
    seeds,
    ops_per_seed: int = 1000,
    partition_ops: bool = True,
    valid_policies_only: bool = False,
    pair_name: str = "A-vs-B",
) -> ConformanceReport:
    """Lockstep-run each seed's script against both factories and compare."""
    report = ConformanceReport(pair=pair_name)
    for seed in seeds:
        script = _Script(seed, partition_ops, valid_policies_only)
        side_a = _Side(factory_a)
        side_b = _Side(factory_b)
        mismatch = None
        ops_done = 0
        try:
            for i in range(ops_per_seed):
                op = script.next_op()
                out_a = side_a.run(op)
                out_b = side_b.run(op)
                ops_done = i + 1
                if out_a != out_b:
                    mismatch = f"op#{i} {op!r}: A={out_a!r} B={out_b!r}"
                    break
                script.observe(op, out_a)
        finally:
            side_a.close_sessions()
            side_b.close_sessions()
            factory_a.destroy(side_a.store)
            factory_b.destroy(side_b.store)
        report.outcomes.append(SeedOutcome(seed=seed, ops=ops_done, mismatch=mismatch))
    return report
