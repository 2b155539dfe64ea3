"""Error hierarchy for the conditions store.

Every public failure mode is a subclass of CondStoreError with a stable
``name`` (the class name) used by the CLI and the scripting bridge.
"""

from __future__ import annotations


class CondStoreError(Exception):
    """Base class for all domain errors raised by this package."""

    @property
    def name(self) -> str:
        return type(self).__name__


class InvalidPath(CondStoreError):
    pass


class InvalidInterval(CondStoreError):
    pass


class InvalidSchema(CondStoreError):
    pass


class InvalidArgument(CondStoreError):
    pass


class SchemaMismatch(CondStoreError):
    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class NoSuchFolder(CondStoreError):
    pass


class NoSuchParent(CondStoreError):
    pass


class AlreadyExists(CondStoreError):
    pass


class ParentNotFolderset(CondStoreError):
    pass


class NoValidObject(CondStoreError):
    pass


class UnsupportedByStrategy(CondStoreError):
    pass


class TagExists(CondStoreError):
    pass


class NoSuchTag(CondStoreError):
    pass


class SequenceInFuture(CondStoreError):
    pass


class NoUpdateSession(CondStoreError):
    pass


class UpdateSessionBusy(CondStoreError):
    pass


class SessionClosed(CondStoreError):
    pass


class OutOfOrder(CondStoreError):
    pass


class CorruptStore(CondStoreError):
    pass


class LockHeld(CondStoreError):
    pass


class ReadOnlyStore(CondStoreError):
    pass


class NoSuchPartition(CondStoreError):
    pass


class PartitionOffline(CondStoreError):
    pass


class ChunkMismatch(CondStoreError):
    pass


class ChecksumFailure(CondStoreError):
    pass


class OracleMismatch(CondStoreError):
    pass
