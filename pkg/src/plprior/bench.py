"""Outlier-robustness study on a synthetic planar grid.

A 10x10 grid spanning the unit square in the z=0 plane gets one point lifted
by ``d``. The planar consistency loss (mean |det| over 4-point sets) is
computed exactly over all C(100, 4) sets and by Monte Carlo, and compared to
the least-squares plane-fit loss as ``d`` sweeps 0..2.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .losses import lsq_fit_loss
from .regions import draw_distinct, make_rng

GRID_SIDE = 10
MIDDLE_INDEX = (5, 5)
DEFAULT_SHIFTS = tuple(i / 10 for i in range(21))
DEFAULT_MC_SAMPLES = 10 ** 6


def make_grid(outlier="corner", d=0.0, side=GRID_SIDE):
    """(side*side, 3) grid points; row-major with x fastest. The outlier moves by (0, 0, d)."""
    if d < 0:
        raise ValueError("outlier shift must be non-negative")
    ys, xs = np.mgrid[0:side, 0:side] / (side - 1)
    pts = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(side * side)])
    pts[outlier_index(outlier, side), 2] = d
    return pts


def outlier_index(outlier, side=GRID_SIDE):
    if outlier == "corner":
        return 0
    if outlier == "middle":
        r, c = MIDDLE_INDEX
        return r * side + c
    raise ValueError(f"outlier must be 'corner' or 'middle', got {outlier!r}")


def l_pc_exact(points, threads=None, impl=None):
    """Exact mean of |det| over every unordered 4-point subset."""
    n = len(points)
    if n < 4:
        raise ValueError("need at least 4 points")
    return kernels.sum_abs_det_all(points, threads=threads, impl=impl) / math.comb(n, 4)


def abs_det_terms(points, index_sets):
    p = np.asarray(points, dtype=np.float64)[index_sets]
    a, b, c, d = p[:, 0], p[:, 1], p[:, 2], p[:, 3]
    return np.abs(np.sum(np.cross(b - a, c - a) * (d - a), axis=1))


def sample_index_sets(n_points, n_samples, rng):
    return draw_distinct(rng, n_points, 4, n_samples)


def l_pc_monte_carlo(points, n_samples=DEFAULT_MC_SAMPLES, rng=None, seed=0, index_sets=None):
    """Sample mean and standard error of |det| over uniformly drawn distinct 4-sets."""
    if index_sets is None:
        rng = rng if rng is not None else make_rng(seed)
        index_sets = sample_index_sets(len(points), n_samples, rng)
    if len(index_sets) == 0:
        return float("nan"), float("nan")
    terms = abs_det_terms(points, index_sets)
    se = float(np.std(terms, ddof=1) / math.sqrt(len(terms))) if len(terms) > 1 else float("nan")
    return float(np.mean(terms)), se


@dataclass
class SweepRow:
    d: float
    l_pc_exact: float
    l_pc_mc: float
    l_pc_mc_se: float
    l_ssp: float
    delta_l_pc: float
    delta_l_ssp: float


@dataclass
class SweepResult:
    outlier: str
    rows: list
    mc_samples: int
    seed: int
    summary: dict = field(default_factory=dict)


def _linear_r2(x, y):
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    return float(1 - np.sum(resid ** 2) / ss_tot) if ss_tot > 0 else 1.0


def run_sweep(outlier="corner", shifts=DEFAULT_SHIFTS, mc_samples=DEFAULT_MC_SAMPLES, seed=0,
              threads=None, impl=None):
    """Evaluate both losses at every shift.

    The Monte Carlo column reuses one batch of sampled index sets for all
    shifts (common random numbers), so its increments are as smooth as the
    exact ones.
    """
    shifts = [float(d) for d in shifts]
    n_points = GRID_SIDE * GRID_SIDE
    index_sets = None
    if mc_samples > 0:
        index_sets = sample_index_sets(n_points, mc_samples, make_rng(seed))
    rows = []
    for d in shifts:
        pts = make_grid(outlier, d)
        exact = l_pc_exact(pts, threads=threads, impl=impl)
        mc, se = (l_pc_monte_carlo(pts, index_sets=index_sets) if index_sets is not None
                  else (float("nan"), float("nan")))
        rows.append(SweepRow(d, exact, mc, se, lsq_fit_loss(pts), float("nan"), float("nan")))
    for prev, row in zip(rows, rows[1:]):
        row.delta_l_pc = row.l_pc_exact - prev.l_pc_exact
        row.delta_l_ssp = row.l_ssp - prev.l_ssp
    return SweepResult(outlier, rows, int(mc_samples), int(seed), summarize(rows))


def summarize(rows):
    steps = rows[1:]
    d_pc = [r.delta_l_pc for r in steps]
    summary = {
        "n_rows": len(rows),
        "max_delta_l_pc": max(abs(x) for x in d_pc) if d_pc else float("nan"),
        "delta_l_pc_spread": (max(d_pc) - min(d_pc)) if d_pc else float("nan"),
        "delta_l_ssp_r2": _linear_r2([r.d for r in steps], [r.delta_l_ssp for r in steps])
        if len(steps) >= 2 else float("nan"),
    }
    mc = [r for r in rows if not math.isnan(r.l_pc_mc)]
    if mc:
        z = [abs(r.l_pc_mc - r.l_pc_exact) / r.l_pc_mc_se if r.l_pc_mc_se > 0
             else (0.0 if r.l_pc_mc == r.l_pc_exact else math.inf) for r in mc]
        summary["max_mc_z"] = max(z)
    return summary


CSV_FIELDS = ["d", "l_pc_exact", "l_pc_mc", "l_pc_mc_se", "l_ssp", "delta_l_pc", "delta_l_ssp"]


def _fmt(x):
    return "" if isinstance(x, float) and math.isnan(x) else repr(float(x))


def write_sweep_csv(path, result, exact_only=False):
    fields = [f for f in CSV_FIELDS if not (exact_only and f.startswith("l_pc_mc"))]
    with open(path, "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(fields)
        for row in result.rows:
            wr.writerow([_fmt(getattr(row, k)) for k in fields])
