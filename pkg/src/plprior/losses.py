"""Plane and line prior losses.

``planar_term`` and ``linear_term`` are the per-set error terms: the absolute
scalar triple product of four points and the cross-product norm of three.
The consistency losses average them over point sets drawn from pseudo
planes or line segments, and return the gradient with respect to depth at
the sampled pixels.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from .imaging import depth_to_points, normalize_pixel
from .regions import allocate_samples, make_rng, sample_point_sets
from .synthesis import edge_aware_smoothness


@dataclass(frozen=True)
class LossWeights:
    alpha_cos: float = 0.2
    alpha_pc: float = 2.0
    alpha_lc: float = 0.5
    alpha_ds: float = 0.001  # only used with the disparity representation
    n_planar: int = 512
    n_linear: int = 128

    def __post_init__(self):
        for name in ("alpha_cos", "alpha_pc", "alpha_lc", "alpha_ds"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.n_planar < 0 or self.n_linear < 0:
            raise ValueError("sample budgets must be non-negative")


# --------------------------------------------------------------------------
# per-set terms


def planar_term(A, B, C, D):
    """|(B-A) x (C-A) . (D-A)| and its gradient w.r.t. the four points.

    Accepts points of shape (..., 3); the gradient has shape (..., 4, 3).
    The subgradient at a zero determinant is taken as 0.
    """
    A, B, C, D = (np.asarray(p, dtype=np.float64) for p in (A, B, C, D))
    a, b, c = B - A, C - A, D - A
    n = np.cross(a, b)
    det = np.sum(n * c, axis=-1)
    s = np.sign(det)[..., None]
    gB = s * np.cross(b, c)
    gC = s * np.cross(c, a)
    gD = s * n
    gA = -(gB + gC + gD)
    return np.abs(det), np.stack([gA, gB, gC, gD], axis=-2)


def linear_term(E, F, G):
    """‖(F-E) x (G-E)‖ and its gradient w.r.t. the three points, shape (..., 3, 3)."""
    E, F, G = (np.asarray(p, dtype=np.float64) for p in (E, F, G))
    a, b = F - E, G - E
    cr = np.cross(a, b)
    norm = np.linalg.norm(cr, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where((norm > 0)[..., None], cr / norm[..., None], 0.0)
    gF = np.cross(b, unit)
    gG = np.cross(unit, a)
    gE = -(gF + gG)
    return norm, np.stack([gE, gF, gG], axis=-2)


# --------------------------------------------------------------------------
# map-level losses


def coeff_smoothness(coeffs, image):
    """Edge-aware smoothness of each coefficient channel, normalized by its mean magnitude."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 3 or coeffs.shape[2] != 3:
        raise ValueError("coefficient map must be (H, W, 3)")
    total = 0.0
    for i in range(3):
        ch = coeffs[:, :, i]
        scale = np.mean(np.abs(ch))
        if scale == 0:
            continue
        total += edge_aware_smoothness(ch / scale, image)
    return total


@dataclass
class ConsistencyResult:
    loss: float
    n_sets: int
    pixels: np.ndarray  # flat indices of sampled pixels, ascending
    grad: np.ndarray  # d loss / d depth at those pixels
    skipped: bool = False  # no eligible instance
    terms: np.ndarray = field(default=None, repr=False)


def _consistency(depth, K, instances, set_size, budget, rng, term_fn):
    h, w = depth.shape
    valid = depth.mask.ravel()
    pools = [np.asarray(p, dtype=np.intp) for p in instances]
    pools = [p[valid[p]] for p in pools]
    pools = [p for p in pools if len(p) >= set_size]
    empty = ConsistencyResult(0.0, 0, np.empty(0, np.intp), np.empty(0), skipped=not pools,
                              terms=np.empty(0))
    if not pools or budget == 0:
        return empty
    alloc = allocate_samples([len(p) for p in pools], budget)
    sets = np.concatenate(
        [sample_point_sets(p, set_size, int(m), rng) for p, m in zip(pools, alloc) if m > 0]
    )
    v, u = np.divmod(sets, w)
    rays = normalize_pixel(u, v, K)  # (n, k, 3)
    pts = depth_to_points(depth, K, sets.ravel()).reshape(sets.shape + (3,))
    values, grads = term_fn(*(pts[:, j] for j in range(set_size)))
    n = len(values)
    dz = np.sum(grads * rays, axis=-1) / n  # chain through X = Z * ray
    pix, inv = np.unique(sets.ravel(), return_inverse=True)
    acc = np.zeros(len(pix))
    np.add.at(acc, inv, dz.ravel())
    return ConsistencyResult(float(np.mean(values)), n, pix, acc, terms=values)


def planar_consistency(depth, K, planes, weights=LossWeights(), rng=None, seed=0):
    """Mean planar term over ``weights.n_planar`` 4-point sets from pseudo planes."""
    rng = rng if rng is not None else make_rng(seed)
    return _consistency(depth, K, planes.pixels, 4, weights.n_planar, rng, planar_term)


def linear_consistency(depth, K, lines, weights=LossWeights(), rng=None, seed=0):
    """Mean linear term over ``weights.n_linear`` 3-point sets from line segments."""
    rng = rng if rng is not None else make_rng(seed)
    return _consistency(depth, K, lines.pixels, 3, weights.n_linear, rng, linear_term)


@dataclass
class LossBreakdown:
    l_pe: float = 0.0
    l_ds: float = 0.0
    l_cos: float = 0.0
    l_pc: float = 0.0
    l_lc: float = 0.0
    total: float = 0.0
    representation: str = "planar"
    weights: LossWeights = field(default_factory=LossWeights)
    flags: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["weights"] = asdict(self.weights)
        return d


def total_loss(l_pe, l_cos=0.0, l_pc=0.0, l_lc=0.0, l_ds=0.0, weights=LossWeights(),
               representation="planar", flags=None):
    """Combine the terms.

    With the planar representation the coefficient smoothness replaces the
    disparity smoothness; ``l_ds`` is then reported but not added.
    """
    if representation == "planar":
        smooth = weights.alpha_cos * l_cos
    elif representation == "disparity":
        smooth = weights.alpha_ds * l_ds
    else:
        raise ValueError(f"unknown representation {representation!r}")
    total = l_pe + smooth + weights.alpha_pc * l_pc + weights.alpha_lc * l_lc
    return LossBreakdown(l_pe, l_ds, l_cos, l_pc, l_lc, total, representation, weights,
                         dict(flags or {}))


def lsq_fit_loss(points):
    """Mean squared z-residual of the ordinary least-squares plane z = a x + b y + c."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3 or len(points) < 3:
        raise ValueError("need at least 3 points of shape (n, 3)")
    design = np.column_stack([points[:, 0], points[:, 1], np.ones(len(points))])
    coef, _, rank, _ = np.linalg.lstsq(design, points[:, 2], rcond=None)
    if rank < 3:
        raise ValueError("degenerate design: points are collinear in x-y")
    resid = points[:, 2] - design @ coef
    return float(np.mean(resid ** 2))
