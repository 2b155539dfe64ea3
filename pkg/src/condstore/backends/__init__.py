"""Persistence backends: in-memory (volatile) and file-based (durable)."""

from .base import Backend, CommitGroup
from .memory import MemoryBackend
from .filestore import FileBackend

__all__ = ["Backend", "CommitGroup", "MemoryBackend", "FileBackend"]
