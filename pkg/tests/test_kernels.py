"""Tiling kernel properties, checked against a brute-force winner oracle."""

from __future__ import annotations

import random
from array import array

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condstore import PLUS_INF
from condstore import kernels
from condstore.errors import InvalidArgument
from condstore.kernels import pure


def brute_winner(since, till, m, t):
    """Highest index whose [since, till) contains t, or None."""
    best = None
    for i in range(m):
        if since[i] <= t < till[i]:
            best = i
    return best


def probe_points(since, till, m):
    """Every endpoint, one point inside each gap, and the extremes."""
    pts = {0, PLUS_INF - 1}
    for i in range(m):
        pts.add(since[i])
        if till[i] < PLUS_INF:
            pts.add(till[i])
        if till[i] - since[i] > 1:
            pts.add(since[i] + (till[i] - since[i]) // 2)
    for a in sorted(pts)[:-1]:
        pts.add(a + 1)
    return sorted(p for p in pts if p < PLUS_INF)


def tiling_lookup(starts, ends, owners, t):
    lo, hi = 0, len(starts)
    while lo < hi:
        mid = (lo + hi) // 2
        if ends[mid] <= t:
            lo = mid + 1
        else:
            hi = mid
    if lo < len(starts) and starts[lo] <= t < ends[lo]:
        return owners[lo]
    return None


def check_tiling(kernel, since, till, m):
    starts, ends, owners = kernel.build_tiling(since, till, m)
    assert len(starts) == len(ends) == len(owners)
    assert len(starts) <= max(2 * m - 1, 0)
    for j in range(len(starts)):
        assert starts[j] < ends[j]
        if j:
            assert ends[j - 1] <= starts[j]
    for t in probe_points(since, till, m):
        assert tiling_lookup(starts, ends, owners, t) == brute_winner(since, till, m, t)
    return starts, ends, owners


def random_log(rng, n, span=200):
    since = array("Q")
    till = array("Q")
    for _ in range(n):
        s = rng.randrange(span)
        if rng.random() < 0.15:
            e = PLUS_INF
        else:
            e = s + rng.randrange(1, span // 4 + 2)
        since.append(s)
        till.append(e)
    return since, till


def test_empty_input_yields_empty_tiling():
    for kernel_name in kernels.available():
        kernel = kernels.get_kernel(kernel_name)
        assert kernel.build_tiling(array("Q"), array("Q"), 0) == ([], [], [])


def test_single_object_tiles_itself():
    for kernel_name in kernels.available():
        kernel = kernels.get_kernel(kernel_name)
        starts, ends, owners = kernel.build_tiling(array("Q", [5]), array("Q", [9]), 1)
        assert (starts, ends, owners) == ([5], [9], [0])


def test_newer_object_splits_an_older_one():
    since = array("Q", [0, 40])
    till = array("Q", [100, 60])
    for kernel_name in kernels.available():
        kernel = kernels.get_kernel(kernel_name)
        starts, ends, owners = check_tiling(kernel, since, till, 2)
        assert list(zip(starts, ends, owners)) == [(0, 40, 0), (40, 60, 1), (60, 100, 0)]


def test_monotone_open_ended_chain():
    # each store clips the previous open tail down to a finite slice
    n = 50
    since = array("Q", [16 * i for i in range(n)])
    till = array("Q", [PLUS_INF] * n)
    for kernel_name in kernels.available():
        kernel = kernels.get_kernel(kernel_name)
        starts, ends, owners = check_tiling(kernel, since, till, n)
        assert owners == list(range(n))
        assert ends[-1] == PLUS_INF


def test_prefix_m_only_considers_the_first_m_objects():
    since = array("Q", [0, 10])
    till = array("Q", [20, 30])
    for kernel_name in kernels.available():
        kernel = kernels.get_kernel(kernel_name)
        starts, ends, owners = kernel.build_tiling(since, till, 1)
        assert (starts, ends, owners) == ([0], [20], [0])


def test_randomized_logs_match_brute_force():
    rng = random.Random(0xC0FFEE)
    for trial in range(40):
        n = rng.randrange(0, 60)
        since, till = random_log(rng, n)
        for kernel_name in kernels.available():
            kernel = kernels.get_kernel(kernel_name)
            check_tiling(kernel, since, till, n)


@pytest.mark.skipif(len(kernels.available()) < 2, reason="compiled kernel not built")
def test_compiled_and_pure_agree_exactly():
    compiled = kernels.get_kernel("compiled")
    rng = random.Random(11)
    for trial in range(60):
        n = rng.randrange(0, 120)
        since, till = random_log(rng, n, span=500)
        assert compiled.build_tiling(since, till, n) == pure.build_tiling(since, till, n)


@given(st.lists(st.tuples(st.integers(0, 80), st.integers(1, 30)), max_size=25))
@settings(max_examples=120, deadline=None)
def test_tiling_matches_brute_force_property(items):
    since = array("Q", [s for s, _ in items])
    till = array("Q", [s + w for s, w in items])
    for kernel_name in kernels.available():
        kernel = kernels.get_kernel(kernel_name)
        check_tiling(kernel, since, till, len(items))


def test_kernel_registry():
    names = kernels.available()
    assert "pure" in names
    assert kernels.get_kernel("pure").KERNEL_NAME == "pure"
    assert kernels.get_kernel("auto").KERNEL_NAME in names
    with pytest.raises(InvalidArgument):
        kernels.get_kernel("vectorized")
