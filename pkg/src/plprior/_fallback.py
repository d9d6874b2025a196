"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``."""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=8)
def _triples(n):
    # lexicographic (j, k, l) with j < k < l < n; rows starting at >= i form a suffix
    j, k, l = np.array(
        [(a, b, c) for a in range(n) for b in range(a + 1, n) for c in range(b + 1, n)],
        dtype=np.intp,
    ).reshape(-1, 3).T
    starts = np.searchsorted(j, np.arange(n + 1))
    return j, k, l, starts


def sum_abs_det_first(pts, first):
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    n = pts.shape[0]
    if first < 0 or first >= n:
        raise IndexError("first index out of range")
    j, k, l, starts = _triples(n)
    s = starts[first + 1]
    if s == len(j):
        return 0.0
    j, k, l = j[s:], k[s:], l[s:]
    a = pts[first]
    ax, ay, az = a
    bx = pts[j, 0] - ax
    by = pts[j, 1] - ay
    bz = pts[j, 2] - az
    cx = pts[k, 0] - ax
    cy = pts[k, 1] - ay
    cz = pts[k, 2] - az
    nx = by * cz - bz * cy
    ny = bz * cx - bx * cz
    nz = bx * cy - by * cx
    v = np.abs(nx * (pts[l, 0] - ax) + ny * (pts[l, 1] - ay) + nz * (pts[l, 2] - az))
    return float(np.sum(v))


def segment_graph(n_vertices, edge_a, edge_b, weight, k, min_size):
    parent = list(range(n_vertices))
    rank = [0] * n_vertices
    size = [1] * n_vertices
    thresh = [float(k)] * n_vertices

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def join(ra, rb):
        if rank[ra] < rank[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]
        if rank[ra] == rank[rb]:
            rank[ra] += 1
        return ra

    edge_a = np.asarray(edge_a).tolist()
    edge_b = np.asarray(edge_b).tolist()
    weight = np.asarray(weight, dtype=np.float64).tolist()

    for a, b, w in zip(edge_a, edge_b, weight):
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if w <= thresh[ra] and w <= thresh[rb]:
            r = join(ra, rb)
            thresh[r] = w + k / size[r]

    for a, b in zip(edge_a, edge_b):
        ra, rb = find(a), find(b)
        if ra != rb and (size[ra] < min_size or size[rb] < min_size):
            join(ra, rb)

    return np.array([find(v) for v in range(n_vertices)], dtype=np.intp)
