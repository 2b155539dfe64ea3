"""Volatile backend: nothing survives the process. Useful for tests,
benchmarks and one-shot tooling; the engine alone holds all state."""

from __future__ import annotations

from .base import Backend, CommitGroup


class MemoryBackend(Backend):
    readonly = False

    def __init__(self):
        self._commits = 0

    def load(self, store) -> None:
        pass

    def commit_group(self, group: CommitGroup) -> None:
        self._commits += 1

    def checkpoint(self, store) -> None:
        pass

    def stats(self) -> dict:
        return {"backend_commits": self._commits}
