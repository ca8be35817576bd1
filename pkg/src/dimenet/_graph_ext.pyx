# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled neighbour and triplet enumeration.

Must produce exactly the same arrays, in the same order, as ``_graph_py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def radius_edges(const double[:, ::1] pos, double cutoff, double min_dist):
    """Directed edges (src=j, dst=i) with d_ij <= cutoff, sorted by (i, j).

    Returns ``(src, dst, dist, bad)``. ``bad`` is ``(-1, -1)`` unless a pair
    closer than ``min_dist`` was found, in which case enumeration stops there.
    """
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t i, j, count = 0
    cdef double dx, dy, dz, d
    cdef Py_ssize_t cap = n * (n - 1) if n > 1 else 1
    cdef cnp.int64_t[::1] src = np.empty(cap, dtype=np.int64)
    cdef cnp.int64_t[::1] dst = np.empty(cap, dtype=np.int64)
    cdef double[::1] dist = np.empty(cap, dtype=np.float64)

    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            d = sqrt(dx * dx + dy * dy + dz * dz)
            if d <= min_dist:
                return (np.asarray(src[:0]), np.asarray(dst[:0]),
                        np.asarray(dist[:0]), (int(min(i, j)), int(max(i, j))))
            if d <= cutoff:
                src[count] = j
                dst[count] = i
                dist[count] = d
                count += 1
    return (np.asarray(src[:count]).copy(), np.asarray(dst[:count]).copy(),
            np.asarray(dist[:count]).copy(), (-1, -1))


def triplets(const cnp.int64_t[::1] src, const cnp.int64_t[::1] dst, Py_ssize_t n_atoms):
    """Pairs (kj, ji) of edge indices sharing atom j with k != i.

    Requires edges sorted by destination. Output sorted by (ji, kj).
    """
    cdef Py_ssize_t n_edges = src.shape[0]
    cdef Py_ssize_t e, f, a, j, i, count = 0, total = 0
    cdef cnp.int64_t[::1] ptr = np.zeros(n_atoms + 1, dtype=np.int64)

    for e in range(n_edges):
        ptr[dst[e] + 1] += 1
    for a in range(n_atoms):
        ptr[a + 1] += ptr[a]
    for e in range(n_edges):
        total += ptr[src[e] + 1] - ptr[src[e]]

    cdef cnp.int64_t[::1] kj = np.empty(total, dtype=np.int64)
    cdef cnp.int64_t[::1] ji = np.empty(total, dtype=np.int64)
    for e in range(n_edges):
        j = src[e]
        i = dst[e]
        for f in range(ptr[j], ptr[j + 1]):
            if src[f] == i:
                continue
            kj[count] = f
            ji[count] = e
            count += 1
    return np.asarray(kj[:count]).copy(), np.asarray(ji[:count]).copy()
