import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plprior.coeffs import coeff_map_to_depth, constant_coeff_map, plane_to_coeffs
from plprior.imaging import DepthMap
from plprior.regions import LineSegment2D, LineSegmentSet, PseudoPlaneSet, make_rng
from plprior.regularity import (
    RegularityReport, depth_metrics, evaluate_regularity, instance_report,
    median_scale_align, pca_residual_ratios, reliable_ids, select_reliable, tls_line_fit,
    tls_plane_fit,
)


def dmap(a):
    return DepthMap.from_array(np.asarray(a, float))


def rigid(rng):
    q = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    return q, rng.normal(size=3)


def noisy_plane(sigma, side=100, seed=0):
    g = np.linspace(0, 1, side)
    x, y = np.meshgrid(g, g)
    return np.column_stack([x.ravel(), y.ravel(), sigma * make_rng(seed).normal(size=side * side)])


# ---------------------------------------------------------------- fits


def test_plane_fit_on_exact_plane():
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(size=(30, 2)), np.full(30, 2.0)])
    fit = tls_plane_fit(pts)
    assert np.allclose(np.abs(fit.normal), [0, 0, 1], atol=1e-12)
    assert np.max(np.abs(fit.deviations)) < 1e-12


def test_tilted_square():
    c = 1 / math.sqrt(2)
    pts = np.array([[0, 0, 0], [1, 0, 0], [0, c, c], [1, c, c]]) + [0, 0, 3]
    fit = tls_plane_fit(pts)
    assert np.allclose(np.abs(fit.normal), [0, c, c], atol=1e-9)
    assert np.max(np.abs(fit.deviations)) < 1e-12


def test_line_fit():
    t = np.linspace(-1, 2, 17)
    d = np.array([1.0, 2.0, -2.0]) / 3
    pts = np.outer(t, d) + [0.3, 0.1, 4]
    fit = tls_line_fit(pts)
    assert np.allclose(np.abs(fit.direction), np.abs(d), atol=1e-12)
    assert fit.deviations.max() < 1e-12


def test_noisy_plane_avg_dev_law():
    sigma = 0.01
    r = instance_report(noisy_plane(sigma), "plane")
    assert abs(r.avg_dev / (sigma * math.sqrt(2 / math.pi)) - 1) < 0.05
    assert r.avg_dev <= r.max_dev


def test_residual_ratio_examples():
    rng = np.random.default_rng(1)
    plane = np.column_stack([rng.normal(size=(50, 2)), np.zeros(50)]) @ rigid(rng)[0].T
    assert pca_residual_ratios(plane)[0] < 1e-12
    line = np.outer(rng.normal(size=40), [0.2, -0.5, 0.7]) + [1, 2, 3]
    assert pca_residual_ratios(line)[1] < 1e-12
    # the 8 cube corners have an exactly isotropic covariance
    cube = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], float)
    rp, rl = pca_residual_ratios(cube)
    assert math.isclose(rp, 1 / 3, rel_tol=1e-12) and math.isclose(rl, 2 / 3, rel_tol=1e-12)
    with pytest.raises(ValueError):
        pca_residual_ratios(cube[:2])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 100))
def test_invariances(seed, s):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(30, 3)) * [3, 1, 0.1]
    R, t = rigid(rng)
    moved = pts @ R.T + t
    a, b = np.abs(tls_plane_fit(pts).deviations), np.abs(tls_plane_fit(moved).deviations)
    assert np.allclose(a, b, rtol=1e-9, atol=1e-9 * np.abs(pts).max())
    la, lb = tls_line_fit(pts).deviations, tls_line_fit(moved).deviations
    assert np.allclose(la, lb, rtol=1e-9, atol=1e-9 * np.abs(pts).max())
    r0, r1 = np.array(pca_residual_ratios(pts)), np.array(pca_residual_ratios(s * pts))
    assert np.allclose(r0, r1, rtol=1e-10, atol=0)
    rep = instance_report(pts, "plane")
    assert 0 <= rep.avg_dev <= rep.max_dev and 0 <= rep.ratio <= 1 / 3 + 1e-15
    rep = instance_report(pts, "line")
    assert 0 <= rep.avg_dev <= rep.max_dev and 0 <= rep.ratio <= 2 / 3 + 1e-15


def test_select_reliable():
    reps = [RegularityReport(i, "plane", 10, 0.01, m, 0.0) for i, m in
            enumerate([0.29, 0.31, 0.30, 0.1])]
    kept, frac = select_reliable(reps)
    assert [r.instance_id for r in kept] == [0, 3] and frac == 0.5
    assert select_reliable([]) == ([], 0.0)


# ---------------------------------------------------------------- depth metrics


def brute_metrics(p, g):
    n = len(p)
    rel = sum(abs(a - b) / b for a, b in zip(p, g)) / n
    lg = sum(abs(math.log10(a) - math.log10(b)) for a, b in zip(p, g)) / n
    rms = math.sqrt(sum((a - b) ** 2 for a, b in zip(p, g)) / n)
    acc = [sum(1 for a, b in zip(p, g) if max(a / b, b / a) < 1.25 ** k) / n for k in (1, 2, 3)]
    return (rel, lg, rms, *acc)


def test_depth_metrics_examples():
    g = dmap([[1.0, 2.0], [4.0, 0.5]])
    m = depth_metrics(g, g)
    assert (m.rel, m.log10, m.rms, m.delta1, m.delta2, m.delta3) == (0, 0, 0, 1, 1, 1)
    m = depth_metrics(dmap(1.25 * g.depth), g)
    assert m.delta1 == 0 and m.delta2 == 1 and m.rel == 0.25
    m = depth_metrics(dmap([[1.1, 1.8]]), dmap([[1.0, 2.0]]))
    assert math.isclose(m.rel, 0.1, rel_tol=1e-12)
    assert math.isclose(m.rms, math.sqrt((0.01 + 0.04) / 2), rel_tol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_depth_metrics_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    g = rng.uniform(0.5, 5, (2, 2))
    p = g * rng.uniform(0.6, 1.6, (2, 2))
    m = depth_metrics(dmap(p), dmap(g))
    want = brute_metrics(p.ravel().tolist(), g.ravel().tolist())
    got = (m.rel, m.log10, m.rms, m.delta1, m.delta2, m.delta3)
    for a, b in zip(got, want):
        assert math.isclose(a, b, rel_tol=1e-14, abs_tol=1e-15)


def test_depth_metrics_errors():
    with pytest.raises(ValueError):
        depth_metrics(dmap([[0.0, 1.0]]), dmap([[1.0, 0.0]]))


def test_median_alignment():
    rng = np.random.default_rng(0)
    g = dmap(rng.uniform(1, 5, (6, 7)))
    aligned, s = median_scale_align(g, g)
    assert s == 1.0 and np.array_equal(aligned.depth, g.depth)
    aligned, s = median_scale_align(dmap(g.depth / 2), g)
    assert s == 2.0 and np.array_equal(aligned.depth, g.depth)
    p = dmap(g.depth * rng.uniform(0.7, 1.3, (6, 7)))
    base = depth_metrics(median_scale_align(p, g)[0], g)
    for s in (0.25, 2.0, 64.0):  # dyadic rescaling is exact in floating point
        assert depth_metrics(median_scale_align(dmap(s * p.depth), g)[0], g) == base
    for s in (0.37, 3.0, 1234.5):
        m = depth_metrics(median_scale_align(dmap(s * p.depth), g)[0], g)
        assert np.allclose(list(vars(m).values()), list(vars(base).values()), rtol=1e-12, atol=0)
    with pytest.raises(ValueError):
        median_scale_align(dmap([[1.0, 0.0]]), dmap([[0.0, 1.0]]))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_delta_monotone(seed):
    rng = np.random.default_rng(seed)
    g = rng.uniform(0.1, 10, 20)
    p = g * np.exp(rng.normal(scale=0.5, size=20))
    m = depth_metrics(dmap(p[None]), dmap(g[None]))
    assert 0 <= m.delta1 <= m.delta2 <= m.delta3 <= 1


# ---------------------------------------------------------------- evaluation


def scene(K, h, w):
    n, off = np.array([0.1, -0.2, 1.0]), 3.0
    n /= np.linalg.norm(n)
    depth = coeff_map_to_depth(constant_coeff_map(plane_to_coeffs(n, off), h, w), K)
    labels = np.zeros((h, w), int)
    labels[:, w // 2:] = 1
    flat = np.arange(h * w).reshape(h, w)
    planes = PseudoPlaneSet(labels, np.array([0, 1]), [flat[:, :w // 2].ravel(),
                                                       flat[:, w // 2:].ravel()],
                            np.array([h * (w // 2), h * (w - w // 2)]))
    lines = LineSegmentSet([LineSegment2D(2, 5, 60, 5, flat[5, 2:61]),
                            LineSegment2D(40, 1, 40, 45, flat[1:46, 40])], w, h)
    return depth, planes, lines


def test_evaluate_regularity_on_perfect_plane(K_small):
    depth, planes, lines = scene(K_small, 48, 64)
    ev = evaluate_regularity(depth, K_small, planes, lines)
    assert len(ev.planes) == 2 and len(ev.lines) == 2
    assert ev.plane_summary.max_dev < 1e-12 and ev.plane_summary.ratio < 1e-12
    assert ev.line_summary.max_dev < 1e-12 and ev.line_summary.ratio < 1e-12
    same = evaluate_regularity(depth, K_small, planes, lines)
    assert same.plane_summary == ev.plane_summary and same.line_summary == ev.line_summary


def test_evaluate_regularity_noise_law_and_selection(K_small):
    depth, planes, lines = scene(K_small, 48, 64)
    sigma = 0.01
    rng = make_rng(5)
    # displace each pixel along the plane normal by Gaussian noise via its ray
    n = np.array([0.1, -0.2, 1.0]) / np.linalg.norm([0.1, -0.2, 1.0])
    v, u = np.mgrid[0:48, 0:64]
    ray = np.stack([(u - K_small.cx) / K_small.fx, (v - K_small.cy) / K_small.fy,
                    np.ones(u.shape)], axis=-1)
    noisy = depth.depth + sigma * rng.normal(size=depth.shape) / (ray @ n)
    ev = evaluate_regularity(DepthMap.from_array(noisy), K_small, planes)
    assert abs(ev.plane_summary.avg_dev / (sigma * math.sqrt(2 / math.pi)) - 1) < 0.05
    # corrupt one region on the reference and check it is filtered out
    bad = depth.depth.copy()
    bad[10, 50] += 1.0
    ref = evaluate_regularity(DepthMap.from_array(bad), K_small, planes, lines)
    keep = reliable_ids(ref)
    assert keep["plane"] == {0} and keep["line"] == {0, 1}
    ev = evaluate_regularity(depth, K_small, planes, lines, reliable=keep)
    assert [r.instance_id for r in ev.planes] == [0]


def test_evaluate_skips_tiny_instances(K_small):
    depth, planes, lines = scene(K_small, 48, 64)
    mask = depth.mask.copy()
    mask[:, :32] = False
    d = DepthMap(np.where(mask, depth.depth, 0), mask)
    ev = evaluate_regularity(d, K_small, planes)
    assert ev.plane_summary.n_skipped == 1 and ev.plane_summary.n_instances == 1


def test_per_pixel_aggregate(K_small):
    depth, planes, _ = scene(K_small, 48, 64)
    noisy = depth.depth * (1 + 0.01 * make_rng(0).normal(size=depth.shape))
    ev = evaluate_regularity(DepthMap.from_array(noisy), K_small, planes, per_pixel=True)
    pooled = np.concatenate([r.deviations for r in ev.planes]).mean()
    assert ev.plane_summary.avg_dev == pooled
