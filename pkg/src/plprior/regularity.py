"""Flatness / straightness evaluation and standard depth metrics."""
import csv
import math
from dataclasses import dataclass

import numpy as np

from .imaging import DepthMap, depth_to_points

RELIABLE_MAX_DEV = 0.3  # meters


def median_scale_align(pred, gt):
    """Scale ``pred`` by median(gt / pred) over jointly valid pixels."""
    joint = pred.mask & gt.mask
    if not joint.any():
        raise ValueError("prediction and ground truth share no valid pixel")
    scale = float(np.median(gt.depth[joint] / pred.depth[joint]))
    return DepthMap(np.where(pred.mask, pred.depth * scale, 0.0), pred.mask.copy()), scale


def _principal_axes(points):
    """Centroid, eigenvalues (descending) and eigenvectors (columns) of the covariance."""
    points = np.asarray(points, dtype=np.float64)
    centroid = points.mean(axis=0)
    centered = points - centroid
    cov = centered.T @ centered / len(points)
    vals, vecs = np.linalg.eigh(cov)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    # deterministic sign: largest-magnitude component positive
    flip = vecs[np.argmax(np.abs(vecs), axis=0), np.arange(3)] < 0
    vecs[:, flip] *= -1
    return centroid, np.clip(vals, 0.0, None), vecs


@dataclass(frozen=True)
class PlaneFit:
    normal: np.ndarray
    centroid: np.ndarray
    deviations: np.ndarray  # signed


@dataclass(frozen=True)
class LineFit:
    direction: np.ndarray
    centroid: np.ndarray
    deviations: np.ndarray  # non-negative distances


def tls_plane_fit(points):
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 3:
        raise ValueError("plane fit needs at least 3 points")
    centroid, _, vecs = _principal_axes(points)
    normal = vecs[:, 2]
    return PlaneFit(normal, centroid, (points - centroid) @ normal)


def tls_line_fit(points):
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 2:
        raise ValueError("line fit needs at least 2 points")
    centroid, _, vecs = _principal_axes(points)
    direction = vecs[:, 0]
    centered = points - centroid
    perp = centered - np.outer(centered @ direction, direction)
    return LineFit(direction, centroid, np.linalg.norm(perp, axis=1))


def pca_residual_ratios(points):
    """(R_plane, R_line): share of variance off the principal plane / line."""
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 3:
        raise ValueError("residual ratios need at least 3 points")
    _, lam, _ = _principal_axes(points)
    total = lam.sum()
    if total == 0:
        return 0.0, 0.0
    return float(lam[2] / total), float((lam[1] + lam[2]) / total)


@dataclass(frozen=True)
class RegularityReport:
    instance_id: int
    kind: str  # "plane" or "line"
    n_pixels: int
    avg_dev: float
    max_dev: float
    ratio: float
    deviations: np.ndarray = None


def instance_report(points, kind, instance_id=0):
    points = np.asarray(points, dtype=np.float64)
    if kind == "plane":
        dev = np.abs(tls_plane_fit(points).deviations)
        ratio = pca_residual_ratios(points)[0]
    elif kind == "line":
        dev = tls_line_fit(points).deviations
        ratio = pca_residual_ratios(points)[1]
    else:
        raise ValueError(f"unknown instance kind {kind!r}")
    return RegularityReport(instance_id, kind, len(points), float(dev.mean()), float(dev.max()),
                            ratio, dev)


def select_reliable(reports, max_dev=RELIABLE_MAX_DEV):
    """Reports whose maximum deviation is strictly below ``max_dev``, and the retained fraction."""
    kept = [r for r in reports if r.max_dev < max_dev]
    frac = len(kept) / len(reports) if reports else 0.0
    return kept, frac


@dataclass(frozen=True)
class Aggregate:
    kind: str
    n_instances: int
    n_skipped: int
    avg_dev: float
    max_dev: float
    ratio: float


def aggregate(reports, kind, n_skipped=0, per_pixel=False):
    """Mean over instances; with ``per_pixel`` the Avg Dev is pooled over all pixels."""
    if not reports:
        nan = float("nan")
        return Aggregate(kind, 0, n_skipped, nan, nan, nan)
    if per_pixel:
        avg = float(np.concatenate([r.deviations for r in reports]).mean())
    else:
        avg = math.fsum(r.avg_dev for r in reports) / len(reports)
    return Aggregate(
        kind,
        len(reports),
        n_skipped,
        avg,
        math.fsum(r.max_dev for r in reports) / len(reports),
        math.fsum(r.ratio for r in reports) / len(reports),
    )


def _instance_reports(depth, K, pixel_lists, ids, kind, min_points=3):
    reports, skipped = [], 0
    valid = depth.mask.ravel()
    for iid, pix in zip(ids, pixel_lists):
        pix = np.asarray(pix, dtype=np.intp)
        pix = pix[valid[pix]]
        if len(pix) < min_points:
            skipped += 1
            continue
        reports.append(instance_report(depth_to_points(depth, K, pix), kind, int(iid)))
    return reports, skipped


@dataclass
class RegularityEvaluation:
    planes: list
    lines: list
    plane_summary: Aggregate
    line_summary: Aggregate


def evaluate_regularity(depth, K, planes=None, lines=None, reliable=None, per_pixel=False):
    """Per-instance flatness and straightness on ``depth`` (already scale-aligned).

    ``reliable`` optionally maps ``"plane"``/``"line"`` to the set of instance
    ids to keep (usually chosen with ``select_reliable`` on reference depth).
    Plane ids are region labels; line ids are segment indices.
    """
    plane_reports, plane_skip, line_reports, line_skip = [], 0, [], 0
    if planes is not None and len(planes):
        plane_reports, plane_skip = _instance_reports(depth, K, planes.pixels, planes.region_ids,
                                                      "plane")
    if lines is not None and len(lines):
        line_reports, line_skip = _instance_reports(depth, K, lines.pixels, range(len(lines)),
                                                    "line")
    if reliable is not None:
        plane_reports = [r for r in plane_reports if r.instance_id in reliable.get("plane", ())]
        line_reports = [r for r in line_reports if r.instance_id in reliable.get("line", ())]
    return RegularityEvaluation(
        plane_reports,
        line_reports,
        aggregate(plane_reports, "plane", plane_skip, per_pixel),
        aggregate(line_reports, "line", line_skip, per_pixel),
    )


def reliable_ids(evaluation, max_dev=RELIABLE_MAX_DEV):
    return {
        "plane": {r.instance_id for r in select_reliable(evaluation.planes, max_dev)[0]},
        "line": {r.instance_id for r in select_reliable(evaluation.lines, max_dev)[0]},
    }


@dataclass(frozen=True)
class DepthMetrics:
    rel: float
    log10: float
    rms: float
    delta1: float
    delta2: float
    delta3: float


def depth_metrics(pred, gt):
    joint = pred.mask & gt.mask
    if not joint.any():
        raise ValueError("prediction and ground truth share no valid pixel")
    p, g = pred.depth[joint], gt.depth[joint]
    if np.any(p <= 0) or np.any(g <= 0):
        raise ValueError("depths must be positive on valid pixels")
    ratio = np.maximum(p / g, g / p)
    return DepthMetrics(
        rel=float(np.mean(np.abs(p - g) / g)),
        log10=float(np.mean(np.abs(np.log10(p) - np.log10(g)))),
        rms=float(np.sqrt(np.mean((p - g) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25 ** 2)),
        delta3=float(np.mean(ratio < 1.25 ** 3)),
    )


def write_regularity_csv(path, reports, summary):
    with open(path, "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["id", "type", "n_pixels", "avg_dev", "max_dev", "ratio"])
        for r in sorted(reports, key=lambda r: r.instance_id):
            wr.writerow([r.instance_id, r.kind, r.n_pixels, repr(r.avg_dev), repr(r.max_dev),
                         repr(r.ratio)])
        wr.writerow(["mean", summary.kind, summary.n_instances, repr(summary.avg_dev),
                     repr(summary.max_dev), repr(summary.ratio)])
