"""Embeddable conditions-data store.

Payload objects live in hierarchical folders and are versioned along two
axes: an interval of validity on an abstract 64-bit time line, and a
per-folder insertion sequence. Reads resolve "the latest object valid at
time t" under a sequence ceiling (head, tag, or explicit), yielding the
object together with its effective interval. Stores are embedded: either
volatile in-memory or a directory of append-only log files.

Quick start::

    import condstore

    store = condstore.open_store("./db", create=True)
    store.create_folderset("/detector")
    store.create_folder("/detector/hv", "channel:int32,voltage:float64")
    with store.update() as session:
        session.store_object("/detector/hv", 100, 200, (7, 1500.0))
        session.commit()
    obj = store.find_object("/detector/hv", 150)
"""

from .backends import FileBackend, MemoryBackend
from .engine import FolderInfo, ReadSession, Store, TinyReading, UpdateSession
from .errors import (
    AlreadyExists,
    ChecksumFailure,
    ChunkMismatch,
    CondStoreError,
    CorruptStore,
    InvalidArgument,
    InvalidInterval,
    InvalidPath,
    InvalidSchema,
    LockHeld,
    NoSuchFolder,
    NoSuchParent,
    NoSuchPartition,
    NoSuchTag,
    NoUpdateSession,
    NoValidObject,
    OracleMismatch,
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
    MINUS_INF,
    PLUS_INF,
    AttrKind,
    CondObject,
    FolderKind,
    FolderNode,
    FolderPath,
    PartitionAxis,
    PartitionPolicy,
    PayloadSchema,
    ResolvedObject,
    StoreStrategy,
    TagSnapshot,
    ValidityInterval,
    format_time,
    make_schema,
    parse_partition_policy,
    parse_path,
    parse_schema,
    parse_time,
)

__version__ = "1.0.0"


def open_store(path: str | None = None, *, backend: str = "file", mode: str = "rw",
               create: bool = False, kernel: str = "auto", sync: bool = True) -> Store:
    """Open (or create) a store and return the engine facade.

    backend "file" persists under `path`; "memory" ignores `path` and holds
    everything in process. mode "ro" opens without the writer lock and
    rejects every mutation.
    """
    if backend == "memory":
        return Store(MemoryBackend(), kernel=kernel)
    if backend != "file":
        raise InvalidArgument(f"unknown backend {backend!r}")
    if not path:
        raise InvalidArgument("the file backend needs a directory path")
    fb = FileBackend(path, readonly=(mode == "ro"), create=create, sync=sync)
    return Store(fb, kernel=kernel)


__all__ = [
    "open_store", "Store", "UpdateSession", "ReadSession", "FolderInfo", "TinyReading",
    "FileBackend", "MemoryBackend",
    "MINUS_INF", "PLUS_INF", "AttrKind", "CondObject", "FolderKind", "FolderNode",
    "FolderPath", "PartitionAxis", "PartitionPolicy", "PayloadSchema", "ResolvedObject",
    "StoreStrategy", "TagSnapshot", "ValidityInterval",
    "format_time", "make_schema", "parse_partition_policy", "parse_path",
    "parse_schema", "parse_time",
    "CondStoreError", "AlreadyExists", "ChecksumFailure", "ChunkMismatch", "CorruptStore",
    "InvalidArgument", "InvalidInterval", "InvalidPath", "InvalidSchema", "LockHeld",
    "NoSuchFolder", "NoSuchParent", "NoSuchPartition", "NoSuchTag", "NoUpdateSession",
    "NoValidObject", "OracleMismatch", "OutOfOrder", "ParentNotFolderset",
    "PartitionOffline", "ReadOnlyStore", "SchemaMismatch", "SequenceInFuture",
    "SessionClosed", "TagExists", "UnsupportedByStrategy", "UpdateSessionBusy",
]
