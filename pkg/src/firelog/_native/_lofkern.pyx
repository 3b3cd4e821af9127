# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""OpenMP LOF kernel over distinct points with multiplicities.

Mirrors firelog.analytics.lof.lof_distinct_numpy exactly; squared
differences accumulate dimension-by-dimension in the same order and the
build disables FP contraction, so neighborhood tie decisions match the
numpy backend bit-for-bit.
"""

from cython.parallel cimport parallel, prange
from libc.math cimport sqrt
from libc.stdlib cimport free, malloc

import numpy as np


cdef inline double _dist(const double[:, ::1] pts, Py_ssize_t i, Py_ssize_t j,
                         Py_ssize_t d) noexcept nogil:
    cdef double acc = 0.0
    cdef double diff
    cdef Py_ssize_t q
    for q in range(d):
        diff = pts[i, q] - pts[j, q]
        acc = acc + diff * diff
    return sqrt(acc)


cdef inline void _heap_push(double* hd, long long* hc, Py_ssize_t* size,
                            double dval, long long cval) noexcept nogil:
    # max-heap on distance
    cdef Py_ssize_t i = size[0]
    cdef Py_ssize_t parent
    cdef double td
    cdef long long tc
    hd[i] = dval
    hc[i] = cval
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if hd[parent] < hd[i]:
            td = hd[parent]; hd[parent] = hd[i]; hd[i] = td
            tc = hc[parent]; hc[parent] = hc[i]; hc[i] = tc
            i = parent
        else:
            break


cdef inline void _heap_pop(double* hd, long long* hc, Py_ssize_t* size) noexcept nogil:
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t child
    cdef double td
    cdef long long tc
    size[0] -= 1
    hd[0] = hd[size[0]]
    hc[0] = hc[size[0]]
    while True:
        child = 2 * i + 1
        if child >= size[0]:
            break
        if child + 1 < size[0] and hd[child + 1] > hd[child]:
            child += 1
        if hd[child] > hd[i]:
            td = hd[child]; hd[child] = hd[i]; hd[i] = td
            tc = hc[child]; hc[child] = hc[i]; hc[i] = tc
            i = child
        else:
            break


cdef inline double _kth_weighted(const double[:, ::1] pts,
                                 const long long[::1] counts,
                                 Py_ssize_t i, Py_ssize_t m, Py_ssize_t d,
                                 long long need, bint distinct_only,
                                 double* hd, long long* hc) noexcept nogil:
    """Smallest radius whose weighted point count (or distinct-location
    count when ``distinct_only``) reaches ``need``, excluding point i."""
    cdef Py_ssize_t size = 0
    cdef long long total = 0
    cdef long long c
    cdef Py_ssize_t j
    cdef double dij
    for j in range(m):
        if j == i:
            continue
        dij = _dist(pts, i, j, d)
        if total < need or dij < hd[0]:
            c = 1 if distinct_only else counts[j]
            _heap_push(hd, hc, &size, dij, c)
            total += c
            while total - hc[0] >= need:
                total -= hc[0]
                _heap_pop(hd, hc, &size)
    return hd[0]


def lof_distinct(const double[:, ::1] distinct, const long long[::1] counts,
                 long long k):
    """Scores per distinct location; same contract as the numpy backend."""
    cdef Py_ssize_t m = distinct.shape[0]
    cdef Py_ssize_t d = distinct.shape[1]
    if m == 1:
        return np.ones(1)

    kdist_arr = np.zeros(m)
    mr_arr = np.zeros(m)
    weight_arr = np.zeros(m)
    eff_arr = np.zeros(m)
    scores_arr = np.ones(m)
    oom_arr = np.zeros(1, dtype=np.intc)
    cdef double[::1] kdist = kdist_arr
    cdef double[::1] mr = mr_arr
    cdef double[::1] weight = weight_arr
    cdef double[::1] eff = eff_arr
    cdef double[::1] scores = scores_arr
    cdef int[::1] oom = oom_arr

    cdef long long kth = k if k < m - 1 else m - 1
    cdef Py_ssize_t heap_cap = <Py_ssize_t>(k + 2)

    cdef Py_ssize_t i, j
    cdef double dij, reach, radius, rsum, wsum, s
    cdef long long need
    cdef double* hd
    cdef long long* hc

    # phase 1: weighted k-distances
    with nogil, parallel():
        hd = <double*>malloc(heap_cap * sizeof(double))
        hc = <long long*>malloc(heap_cap * sizeof(long long))
        if hd == NULL or hc == NULL:
            oom[0] = 1
        for i in prange(m, schedule="dynamic", chunksize=64):
            if hd == NULL or hc == NULL:
                continue
            if counts[i] - 1 >= k:
                kdist[i] = 0.0
                continue
            need = k - (counts[i] - 1)
            kdist[i] = _kth_weighted(distinct, counts, i, m, d, need, 0, hd, hc)
        free(hd)
        free(hc)
    if oom_arr[0]:
        raise MemoryError("LOF kernel scratch allocation failed")

    # phase 2: mean reach distance over tie-inclusive neighborhoods
    for i in prange(m, schedule="dynamic", chunksize=64, nogil=True):
        if kdist[i] == 0.0:
            mr[i] = 0.0
            weight[i] = <double>(counts[i] - 1)
            continue
        wsum = <double>(counts[i] - 1)  # duplicates of i itself
        rsum = wsum * kdist[i]
        for j in range(m):
            if j == i:
                continue
            dij = _dist(distinct, i, j, d)
            if dij <= kdist[i]:
                reach = kdist[j] if kdist[j] > dij else dij
                rsum = rsum + <double>counts[j] * reach
                wsum = wsum + <double>counts[j]
        mr[i] = rsum / wsum
        weight[i] = wsum

    # phase 2.5: finite density for duplicate piles via the neighborhood
    # expanded to the kth nearest distinct location
    with nogil, parallel():
        hd = <double*>malloc(heap_cap * sizeof(double))
        hc = <long long*>malloc(heap_cap * sizeof(long long))
        if hd == NULL or hc == NULL:
            oom[0] = 1
        for i in prange(m, schedule="dynamic", chunksize=64):
            if hd == NULL or hc == NULL:
                continue
            if mr[i] != 0.0:
                eff[i] = mr[i]
                continue
            radius = _kth_weighted(distinct, counts, i, m, d, kth, 1, hd, hc)
            wsum = <double>(counts[i] - 1)
            rsum = 0.0
            for j in range(m):
                if j == i:
                    continue
                dij = _dist(distinct, i, j, d)
                if dij <= radius:
                    rsum = rsum + <double>counts[j] * (kdist[j] if kdist[j] > dij else dij)
                    wsum = wsum + <double>counts[j]
            eff[i] = rsum / wsum
        free(hd)
        free(hc)
    if oom_arr[0]:
        raise MemoryError("LOF kernel scratch allocation failed")

    # phase 3: density ratios
    for i in prange(m, schedule="dynamic", chunksize=64, nogil=True):
        if kdist[i] == 0.0:
            scores[i] = 1.0
            continue
        s = <double>(counts[i] - 1) / eff[i]
        for j in range(m):
            if j == i:
                continue
            dij = _dist(distinct, i, j, d)
            if dij <= kdist[i]:
                s = s + <double>counts[j] / eff[j]
        scores[i] = mr[i] * s / weight[i]

    return scores_arr
