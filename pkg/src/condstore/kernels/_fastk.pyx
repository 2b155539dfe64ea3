# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of the pure-Python tiling sweep.

Same contract as kernels.pure.build_tiling: given object intervals in
ascending sequence order, produce the visible-set segments (newest wins)
sorted by start. The sweep walks objects newest first, claims coverage, and
emits only the parts not already claimed by a newer object.
"""

from libc.stdlib cimport free, malloc, qsort
from libc.string cimport memmove

KERNEL_NAME = "compiled"

ctypedef unsigned long long u64


cdef struct Seg:
    u64 s
    u64 e
    Py_ssize_t owner


cdef int _seg_cmp(const void *a, const void *b) noexcept nogil:
    cdef const Seg *x = <const Seg *> a
    cdef const Seg *y = <const Seg *> b
    if x.s < y.s:
        return -1
    if x.s > y.s:
        return 1
    return 0


cdef Py_ssize_t _bisect_right(u64 *arr, Py_ssize_t n, u64 v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if v < arr[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


cdef Py_ssize_t _bisect_left(u64 *arr, Py_ssize_t n, u64 v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def build_tiling(since, till, Py_ssize_t m):
    """Return (seg_since, seg_till, seg_owner) lists sorted by segment start."""
    if m <= 0:
        return [], [], []
    cdef const u64[::1] sv = since
    cdef const u64[::1] ev = till
    cdef u64 *cs = <u64 *> malloc(m * sizeof(u64))
    cdef u64 *ce = <u64 *> malloc(m * sizeof(u64))
    cdef Seg *segs = <Seg *> malloc((2 * m) * sizeof(Seg))
    if cs == NULL or ce == NULL or segs == NULL:
        free(cs); free(ce); free(segs)
        raise MemoryError()
    cdef Py_ssize_t nclaimed = 0, nsegs = 0
    cdef Py_ssize_t i, j, lo, hi
    cdef u64 s, e, cursor, new_s, new_e
    with nogil:
        for i in range(m - 1, -1, -1):
            s = sv[i]
            e = ev[i]
            # emit the unclaimed gaps of [s, e)
            j = _bisect_right(ce, nclaimed, s)
            cursor = s
            while j < nclaimed and cs[j] < e:
                if cursor < cs[j]:
                    segs[nsegs].s = cursor
                    segs[nsegs].e = cs[j]
                    segs[nsegs].owner = i
                    nsegs += 1
                if ce[j] > cursor:
                    cursor = ce[j]
                j += 1
            if cursor < e:
                segs[nsegs].s = cursor
                segs[nsegs].e = e
                segs[nsegs].owner = i
                nsegs += 1
            # fold [s, e) into the claimed coverage, merging touched blocks
            lo = _bisect_left(ce, nclaimed, s)
            hi = _bisect_right(cs, nclaimed, e)
            if lo < hi:
                new_s = s if s < cs[lo] else cs[lo]
                new_e = e if e > ce[hi - 1] else ce[hi - 1]
                cs[lo] = new_s
                ce[lo] = new_e
                if hi < nclaimed:
                    memmove(cs + lo + 1, cs + hi, (nclaimed - hi) * sizeof(u64))
                    memmove(ce + lo + 1, ce + hi, (nclaimed - hi) * sizeof(u64))
                nclaimed -= hi - lo - 1
            else:
                if lo < nclaimed:
                    memmove(cs + lo + 1, cs + lo, (nclaimed - lo) * sizeof(u64))
                    memmove(ce + lo + 1, ce + lo, (nclaimed - lo) * sizeof(u64))
                cs[lo] = s
                ce[lo] = e
                nclaimed += 1
        qsort(segs, nsegs, sizeof(Seg), _seg_cmp)
    seg_since = [0] * nsegs
    seg_till = [0] * nsegs
    seg_owner = [0] * nsegs
    for i in range(nsegs):
        seg_since[i] = segs[i].s
        seg_till[i] = segs[i].e
        seg_owner[i] = segs[i].owner
    free(cs)
    free(ce)
    free(segs)
    return seg_since, seg_till, seg_owner
