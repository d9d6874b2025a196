# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops.

Both functions mirror ``plprior._fallback`` term for term; only the order of
floating-point accumulation differs between the two backends.
"""
import numpy as np

from libc.math cimport fabs


def sum_abs_det_first(const double[:, ::1] pts, Py_ssize_t first):
    """Sum of |(B-A) x (C-A) . (D-A)| over all index sets first < j < k < l.

    Accumulation is Neumaier-compensated and runs without the GIL.
    """
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t j, k, l
    cdef double ax, ay, az, bx, by, bz, cx, cy, cz, nx, ny, nz
    cdef double v, t, s = 0.0, comp = 0.0
    if first < 0 or first >= n:
        raise IndexError("first index out of range")
    with nogil:
        ax = pts[first, 0]
        ay = pts[first, 1]
        az = pts[first, 2]
        for j in range(first + 1, n):
            bx = pts[j, 0] - ax
            by = pts[j, 1] - ay
            bz = pts[j, 2] - az
            for k in range(j + 1, n):
                cx = pts[k, 0] - ax
                cy = pts[k, 1] - ay
                cz = pts[k, 2] - az
                nx = by * cz - bz * cy
                ny = bz * cx - bx * cz
                nz = bx * cy - by * cx
                for l in range(k + 1, n):
                    v = fabs(nx * (pts[l, 0] - ax) + ny * (pts[l, 1] - ay)
                             + nz * (pts[l, 2] - az))
                    t = s + v
                    if fabs(s) >= v:
                        comp += (s - t) + v
                    else:
                        comp += (v - t) + s
                    s = t
    return s + comp


cdef inline Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t x) noexcept nogil:
    cdef Py_ssize_t root = x, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def segment_graph(Py_ssize_t n_vertices,
                  const long long[::1] edge_a,
                  const long long[::1] edge_b,
                  const double[::1] weight,
                  double k,
                  Py_ssize_t min_size):
    """Kruskal-order merging with the Int(C) + k/|C| rule, then a min-size pass.

    Edges must already be sorted by weight. Returns the root of every vertex.
    """
    cdef Py_ssize_t m = edge_a.shape[0]
    cdef Py_ssize_t e, ra, rb, v
    cdef double w
    parent_arr = np.arange(n_vertices, dtype=np.intp)
    rank_arr = np.zeros(n_vertices, dtype=np.intp)
    size_arr = np.ones(n_vertices, dtype=np.intp)
    thresh_arr = np.full(n_vertices, k, dtype=np.float64)
    cdef Py_ssize_t[::1] parent = parent_arr
    cdef Py_ssize_t[::1] rank = rank_arr
    cdef Py_ssize_t[::1] size = size_arr
    cdef double[::1] thresh = thresh_arr

    with nogil:
        for e in range(m):
            ra = _find(parent, <Py_ssize_t>edge_a[e])
            rb = _find(parent, <Py_ssize_t>edge_b[e])
            if ra == rb:
                continue
            w = weight[e]
            if w <= thresh[ra] and w <= thresh[rb]:
                if rank[ra] < rank[rb]:
                    ra, rb = rb, ra
                parent[rb] = ra
                size[ra] += size[rb]
                if rank[ra] == rank[rb]:
                    rank[ra] += 1
                thresh[ra] = w + k / size[ra]

        for e in range(m):
            ra = _find(parent, <Py_ssize_t>edge_a[e])
            rb = _find(parent, <Py_ssize_t>edge_b[e])
            if ra != rb and (size[ra] < min_size or size[rb] < min_size):
                if rank[ra] < rank[rb]:
                    ra, rb = rb, ra
                parent[rb] = ra
                size[ra] += size[rb]
                if rank[ra] == rank[rb]:
                    rank[ra] += 1

        for v in range(n_vertices):
            _find(parent, v)
    return parent_arr
