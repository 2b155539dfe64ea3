"""Pure-Python tiling kernel.

build_tiling computes the latest-wins visible set of the first ``m`` objects
of a layer log: newest layers claim their interval first, older layers keep
whatever is still unclaimed (paint-down over a sorted coverage union). The
result tiles the covered part of the axis with pairwise-disjoint segments.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right

KERNEL_NAME = "pure"


def build_tiling(since, till, m: int):
    """Visible-set tiling of objects [0, m) ordered oldest-to-newest.

    Returns (seg_since, seg_till, seg_owner) lists sorted by segment start;
    owners index into the input columns. Gaps in coverage are simply absent.
    """
    segs = []
    claimed_s: list[int] = []  # disjoint, sorted, adjacency-merged coverage
    claimed_e: list[int] = []
    for i in range(m - 1, -1, -1):
        s = since[i]
        e = till[i]
        # walk coverage blocks overlapping [s, e); the gaps between them are ours
        j = bisect_right(claimed_e, s)
        cursor = s
        nblocks = len(claimed_s)
        while j < nblocks and claimed_s[j] < e:
            if cursor < claimed_s[j]:
                segs.append((cursor, claimed_s[j], i))
            if claimed_e[j] > cursor:
                cursor = claimed_e[j]
            j += 1
        if cursor < e:
            segs.append((cursor, e, i))
        # merge [s, e) into the coverage union (adjacent blocks merge too)
        lo = bisect_left(claimed_e, s)
        hi = bisect_right(claimed_s, e)
        if lo < hi:
            new_s = min(s, claimed_s[lo])
            new_e = max(e, claimed_e[hi - 1])
            claimed_s[lo:hi] = [new_s]
            claimed_e[lo:hi] = [new_e]
        else:
            claimed_s.insert(lo, s)
            claimed_e.insert(lo, e)
    segs.sort()
    return [s[0] for s in segs], [s[1] for s in segs], [s[2] for s in segs]
