"""Kernel selection: compiled extension when available, pure Python otherwise.

The environment variable CONDSTORE_KERNEL forces a choice ("pure" or
"compiled"); unset/"auto" prefers the compiled extension. Engines take the
kernel as a constructor argument so benchmarks can compare both in-process.
"""

from __future__ import annotations

import os

from . import pure
from ..errors import InvalidArgument

try:
    from . import _fastk  # type: ignore[attr-defined]
except ImportError:  # extension not built; pure fallback
    _fastk = None


def available() -> tuple[str, ...]:
    return ("pure", "compiled") if _fastk is not None else ("pure",)


def get_kernel(name: str = "auto"):
    """Return the kernel module for ``name`` ('auto', 'pure', 'compiled')."""
    if name in ("auto", "", None):
        name = os.environ.get("CONDSTORE_KERNEL", "auto")
    if name in ("auto", "", None):
        return _fastk if _fastk is not None else pure
    if name == "pure":
        return pure
    if name == "compiled":
        if _fastk is None:
            raise InvalidArgument("compiled kernel requested but the extension is not built")
        return _fastk
    raise InvalidArgument(f"unknown kernel {name!r}")


active = get_kernel()
