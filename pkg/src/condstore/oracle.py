"""Brute-force reference resolver used to cross-check the engine.

Everything here is deliberately naive: winners come from a vectorized
containment scan over all objects, and effective intervals from a piecewise
walk over every interval boundary. No tiling, no caching, no partition
awareness. The engine must agree with this module on every read; the
benchmark harness refuses to time a store that does not.
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

from .model import MINUS_INF, PLUS_INF

__all__ = ["FolderOracle", "TinyOracle"]


class FolderOracle:
    """Reference latest-wins resolution over one folder's full object log.

    Objects are (seq, since, till) triples in insertion order; seq starts at 1
    so a winner of 0 means "nothing valid". A sequence ceiling restricts the
    visible log prefix, which is how tags and as-of-sequence reads look here.
    """

    def __init__(self, objects):
        rows = list(objects)
        n = len(rows)
        self.seq = np.zeros(n, dtype=np.uint64)
        self.since = np.zeros(n, dtype=np.uint64)
        self.till = np.zeros(n, dtype=np.uint64)
        for i, (seq, since, till) in enumerate(rows):
            self.seq[i] = seq
            self.since[i] = since
            self.till[i] = till
        # piecewise-constant winners change only at interval endpoints
        self.edges = np.unique(
            np.concatenate(
                [
                    np.asarray([MINUS_INF, PLUS_INF], dtype=np.uint64),
                    self.since,
                    self.till,
                ]
            )
        )
        self._piecewise: dict[int, np.ndarray] = {}

    def _segments(self, ceiling: int) -> np.ndarray:
        """Winner per edge segment [edges[k], edges[k+1]), cached per ceiling."""
        got = self._piecewise.get(ceiling)
        if got is None:
            got = self._piecewise[ceiling] = self.winners_at(self.edges[:-1], ceiling)
        return got

    def _head(self) -> int:
        return int(self.seq.max()) if self.seq.size else 0

    def prime(self, ceiling: int, chunk: int = 4096) -> None:
        """Precompute one ceiling's winner cache in bounded-memory chunks.

        Big logs would otherwise materialize the full edges-by-objects scan
        matrix in a single numpy call. Chunking changes no answer.
        """
        if ceiling is None:
            ceiling = self._head()
        if ceiling in self._piecewise or self.seq.size == 0:
            return
        edges = self.edges[:-1]
        parts = [
            self.winners_at(edges[lo : lo + chunk], ceiling)
            for lo in range(0, edges.size, chunk)
        ]
        self._piecewise[ceiling] = np.concatenate(parts)

    def winners_at(self, points, ceiling: int) -> np.ndarray:
        """Winning seq per query point (0 where no object is valid)."""
        if ceiling is None:
            ceiling = self._head()
        pts = np.asarray(points, dtype=np.uint64)
        if self.seq.size == 0:
            return np.zeros(pts.shape, dtype=np.uint64)
        contains = (
            (self.since[None, :] <= pts[:, None])
            & (self.till[None, :] > pts[:, None])
            & (self.seq[None, :] <= np.uint64(ceiling))
        )
        masked = np.where(contains, self.seq[None, :], np.uint64(0))
        return masked.max(axis=1)

    def winner_at(self, t: int, ceiling: int) -> int:
        if self.seq.size == 0:
            return 0
        if ceiling is None:
            ceiling = self._head()
        # big logs answer point queries directly; the piecewise cache is O(edges x n)
        if self.edges.size * self.seq.size > 40_000_000 and ceiling not in self._piecewise:
            return int(self.winners_at([t], ceiling)[0])
        k = int(np.searchsorted(self.edges, np.uint64(t), side="right")) - 1
        if k < 0:
            return 0
        return int(self._segments(ceiling)[k])

    def resolve(self, t: int, ceiling: int):
        """(seq, effective_since, effective_till) at t, or None if nothing wins.

        The effective interval is the maximal boundary-aligned span around t
        over which the winner stays this same object.
        """
        if self.seq.size == 0:
            return None
        if ceiling is None:
            ceiling = self._head()
        edges = self.edges
        k = int(np.searchsorted(edges, np.uint64(t), side="right")) - 1
        if k < 0:
            return None
        seg_winners = self._segments(ceiling)
        w = int(seg_winners[k])
        if w == 0:
            return None
        lo = k
        while lo > 0 and int(seg_winners[lo - 1]) == w:
            lo -= 1
        hi = k
        last = len(edges) - 2
        while hi < last and int(seg_winners[hi + 1]) == w:
            hi += 1
        return w, int(edges[lo]), int(edges[hi + 1])

    def visible(self, since: int, till: int, ceiling: int):
        """Visible segments [(seq, since, till), ...] clipped to the window."""
        if self.seq.size == 0:
            return []
        if ceiling is None:
            ceiling = self._head()
        edges = self.edges
        seg_winners = self._segments(ceiling)
        out = []
        for k in range(len(edges) - 1):
            w = int(seg_winners[k])
            if w == 0:
                continue
            s = int(edges[k])
            e = int(edges[k + 1])
            if e <= since or s >= till:
                continue
            s = max(s, since)
            e = min(e, till)
            if out and out[-1][0] == w and out[-1][2] == s:
                out[-1] = (w, out[-1][1], e)
            else:
                out.append((w, s, e))
        return out


class TinyOracle:
    """Reference step-function reads over an append-only sample list."""

    def __init__(self, samples):
        self.ts = [int(t) for t, _ in samples]
        self.vals = [v for _, v in samples]

    def read(self, at: int):
        """(ts, value, effective_since, effective_till) or None before data."""
        i = bisect_right(self.ts, at) - 1
        if i < 0:
            return None
        nxt = self.ts[i + 1] if i + 1 < len(self.ts) else PLUS_INF
        return self.ts[i], self.vals[i], self.ts[i], nxt

    def scan(self, since: int, till: int):
        """Step-function restriction to [since, till): straddler included."""
        start = bisect_right(self.ts, since) - 1
        if start < 0:
            start = 0
        out = []
        for i in range(start, len(self.ts)):
            if self.ts[i] >= till:
                break
            out.append((self.ts[i], self.vals[i]))
        return out
