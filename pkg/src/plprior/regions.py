"""Pseudo-plane and line-segment extraction, sample allocation and point-set sampling."""
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from . import kernels

PLANE_MIN_PIXELS = 1000
LINE_MIN_FRACTION = 0.1  # of the image diagonal


def make_rng(seed):
    """Counter-based Philox4x64 generator; the stream is fixed per seed."""
    return np.random.Generator(np.random.Philox(int(seed)))


# --------------------------------------------------------------------------
# graph-based segmentation


def _grid_edges(h, w):
    idx = np.arange(h * w).reshape(h, w)
    pairs = [
        (idx[:, :-1], idx[:, 1:]),  # right
        (idx[:-1, :], idx[1:, :]),  # down
        (idx[:-1, :-1], idx[1:, 1:]),  # down-right
        (idx[1:, :-1], idx[:-1, 1:]),  # up-right
    ]
    a = np.concatenate([p[0].ravel() for p in pairs])
    b = np.concatenate([p[1].ravel() for p in pairs])
    return a.astype(np.int64), b.astype(np.int64)


def felzenszwalb_segment(image, k=150.0, sigma=0.8, min_size=300, backend=None):
    """Graph-based segmentation on an 8-connected pixel grid.

    ``image`` holds intensities in [0, 1] (gray or RGB). Edge weights are
    Euclidean color distances on the 0-255 scale, so ``k`` has the usual
    magnitude of the reference implementation. Returns int labels numbered
    0..n-1 in raster order of first appearance.
    """
    img = np.asarray(image, dtype=np.float64) * 255.0
    if img.ndim == 2:
        img = img[:, :, None]
    h, w = img.shape[:2]
    if sigma > 0:
        img = gaussian_filter(img, sigma=(sigma, sigma, 0), mode="nearest", truncate=4.0)
    a, b = _grid_edges(h, w)
    flat = img.reshape(h * w, -1)
    weight = np.sqrt(np.sum((flat[a] - flat[b]) ** 2, axis=1))
    order = np.argsort(weight, kind="stable")
    a, b, weight = (np.ascontiguousarray(x[order]) for x in (a, b, weight))
    impl = kernels.get_backend(backend)
    roots = impl.segment_graph(h * w, a, b, weight, float(k), int(min_size))
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse].reshape(h, w)


# --------------------------------------------------------------------------
# pseudo planes


@dataclass(frozen=True)
class PseudoPlaneSet:
    labels: np.ndarray  # source label per pixel
    region_ids: np.ndarray
    pixels: list  # flat row-major pixel indices per retained region
    counts: np.ndarray

    def __len__(self):
        return len(self.region_ids)

    @property
    def shape(self):
        return self.labels.shape


def filter_pseudo_planes(labels, min_pixels=PLANE_MIN_PIXELS):
    """Keep regions with strictly more than ``min_pixels`` pixels.

    Negative labels are treated as unassigned.
    """
    labels = np.asarray(labels)
    if labels.dtype.kind == "f":
        if not np.all(labels == np.round(labels)):
            raise ValueError("label raster must hold integer ids")
        labels = labels.astype(np.int64)
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    ids, starts, counts = np.unique(flat[order], return_index=True, return_counts=True)
    keep = (ids >= 0) & (counts > min_pixels)
    pixels = [np.sort(order[s:s + c]) for s, c, kp in zip(starts, counts, keep) if kp]
    return PseudoPlaneSet(labels, ids[keep], pixels, counts[keep])


# --------------------------------------------------------------------------
# line segments


class LineFileError(ValueError):
    pass


@dataclass(frozen=True)
class LineSegment2D:
    u0: float
    v0: float
    u1: float
    v1: float
    pixels: np.ndarray  # flat row-major indices

    @property
    def length(self):
        return math.hypot(self.u1 - self.u0, self.v1 - self.v0)


@dataclass(frozen=True)
class LineSegmentSet:
    segments: list
    width: int
    height: int

    def __len__(self):
        return len(self.segments)

    @property
    def pixels(self):
        return [s.pixels for s in self.segments]

    @property
    def counts(self):
        return np.array([len(s.pixels) for s in self.segments], dtype=np.int64)


def point_segment_distance(u, v, u0, v0, u1, v1):
    """Euclidean distance from points to the closed segment (projection clamped)."""
    du, dv = u1 - u0, v1 - v0
    len2 = du * du + dv * dv
    pu, pv = np.asarray(u, dtype=np.float64) - u0, np.asarray(v, dtype=np.float64) - v0
    if len2 == 0:
        return np.hypot(pu, pv)
    t = np.clip((pu * du + pv * dv) / len2, 0.0, 1.0)
    return np.hypot(pu - t * du, pv - t * dv)


def assign_pixels(u0, v0, u1, v1, width, height):
    """Flat indices of pixels strictly closer than 1 to the segment, row-major order."""
    lo_u = max(int(math.floor(min(u0, u1))) - 1, 0)
    hi_u = min(int(math.ceil(max(u0, u1))) + 1, width - 1)
    lo_v = max(int(math.floor(min(v0, v1))) - 1, 0)
    hi_v = min(int(math.ceil(max(v0, v1))) + 1, height - 1)
    if lo_u > hi_u or lo_v > hi_v:
        return np.empty(0, dtype=np.intp)
    vv, uu = np.mgrid[lo_v:hi_v + 1, lo_u:hi_u + 1]
    d = point_segment_distance(uu, vv, u0, v0, u1, v1)
    sel = d < 1.0
    return (vv[sel] * width + uu[sel]).astype(np.intp)


def read_line_file(path):
    """Parse ``u0 v0 u1 v1`` rows; blank lines and ``#`` comments are skipped."""
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 4:
                raise LineFileError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            try:
                row = [float(x) for x in fields]
            except ValueError:
                raise LineFileError(f"{path}:{lineno}: non-numeric field") from None
            if not all(math.isfinite(x) for x in row):
                raise LineFileError(f"{path}:{lineno}: non-finite coordinate")
            rows.append(row)
    return np.array(rows, dtype=np.float64).reshape(-1, 4)


def build_line_set(endpoints, width, height, min_fraction=LINE_MIN_FRACTION):
    """Filter short segments and assign pixels.

    Endpoints must lie in the image extent ``[-0.5, W-0.5] x [-0.5, H-0.5]``.
    Segments shorter than ``min_fraction`` of the diagonal are dropped.
    """
    min_len = min_fraction * math.hypot(width, height)
    segments = []
    for row in np.asarray(endpoints, dtype=np.float64).reshape(-1, 4):
        u0, v0, u1, v1 = (float(x) for x in row)
        for u, v in ((u0, v0), (u1, v1)):
            if not (-0.5 <= u <= width - 0.5 and -0.5 <= v <= height - 0.5):
                raise LineFileError(f"endpoint ({u}, {v}) outside {width}x{height} image")
        if math.hypot(u1 - u0, v1 - v0) < min_len:
            continue
        segments.append(LineSegment2D(u0, v0, u1, v1, assign_pixels(u0, v0, u1, v1, width, height)))
    return LineSegmentSet(segments, width, height)


def ingest_line_segments(path, width, height, min_fraction=LINE_MIN_FRACTION):
    return build_line_set(read_line_file(path), width, height, min_fraction)


# --------------------------------------------------------------------------
# sampling


def allocate_samples(counts, budget):
    """Largest-remainder split of ``budget`` proportional to ``counts``.

    Remainder ties go to the lower instance index. Arithmetic is exact
    integer arithmetic.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if budget < 0:
        raise ValueError("budget must be non-negative")
    if counts.size == 0:
        return np.zeros(0, dtype=np.int64)
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    total = int(counts.sum())
    if total == 0:
        raise ValueError("counts must have a positive sum")
    scaled = [int(c) * int(budget) for c in counts]
    alloc = np.array([s // total for s in scaled], dtype=np.int64)
    rem = [s % total for s in scaled]
    left = int(budget) - int(alloc.sum())
    for i in sorted(range(len(rem)), key=lambda i: (-rem[i], i))[:left]:
        alloc[i] += 1
    return alloc


def draw_distinct(rng, n, set_size, n_sets):
    """``n_sets`` rows of ``set_size`` distinct indices in [0, n), uniform over ordered draws."""
    if set_size > n:
        raise ValueError(f"cannot draw {set_size} distinct items from {n}")
    out = np.empty((n_sets, set_size), dtype=np.int64)
    taken = np.empty((n_sets, 0), dtype=np.int64)
    for j in range(set_size):
        r = rng.integers(0, n - j, size=n_sets, dtype=np.int64)
        # shift the rank past already-taken indices, visiting them in ascending order
        for col in range(taken.shape[1]):
            r += r >= taken[:, col]
        out[:, j] = r
        taken = np.sort(out[:, : j + 1], axis=1)
    return out


def sample_point_sets(pixels, set_size, n_sets, rng):
    """Sample ``n_sets`` tuples of distinct members of ``pixels``."""
    pixels = np.asarray(pixels)
    if n_sets == 0:
        return np.empty((0, set_size), dtype=pixels.dtype if pixels.size else np.int64)
    idx = draw_distinct(rng, len(pixels), set_size, n_sets)
    return pixels[idx]
