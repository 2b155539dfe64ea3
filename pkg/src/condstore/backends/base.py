"""Backend contract between the engine and its persistence layer.

The engine hands a backend structured commit groups; the backend makes them
durable before the engine exposes them to readers. On open, the backend
replays committed history back into the engine through the store's
recover_* methods, so recovered state is built by the same code as live
commits.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field


@dataclass
class CommitGroup:
    """One atomic batch of committed work.

    nodes:    (FolderNode, fid) in creation order
    objects:  (fid, schema, [(seq, since, till, values), ...]) per folder
    tiny:     (fid, typecode, [(ts, value), ...]) per folder
    tags:     (TagSnapshot, [(fid, seq), ...])
    evicts:   (fid, pidx)
    imports:  (fid, pidx, kind, schema, typecode, items)
    counters: fid -> (next_seq or None, new_tiny_samples or None)
    """

    nodes: list = field(default_factory=list)
    objects: list = field(default_factory=list)
    tiny: list = field(default_factory=list)
    tags: list = field(default_factory=list)
    evicts: list = field(default_factory=list)
    imports: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)


class Backend(ABC):
    """Durability provider for one store."""

    readonly: bool = False

    @abstractmethod
    def load(self, store) -> None:
        """Replay committed history into a freshly constructed engine."""

    @abstractmethod
    def commit_group(self, group: CommitGroup) -> None:
        """Make one commit group durable; raise to veto the commit."""

    @abstractmethod
    def checkpoint(self, store) -> None:
        """Snapshot engine state so the next open can skip log replay."""

    def stats(self) -> dict:
        return {}

    def close(self) -> None:
        pass
