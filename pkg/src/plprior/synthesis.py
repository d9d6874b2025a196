"""Rigid view synthesis and the basic photometric / smoothness loss terms."""
import json
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter



@dataclass(frozen=True)
class Pose:
    """Rigid transform from the target camera frame to the source frame."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("pose entries must be finite")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("R is not a rotation matrix")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def inverse(self):
        return Pose(self.R.T, -self.R.T @ self.t)


def read_pose(path):
    """Pose file: JSON ``{"R": [...9], "t": [...3]}`` or 12 numbers (R row-major, then t)."""
    with open(path, encoding="utf-8") as f:
        text = f.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = None
    if isinstance(doc, dict):
        R, t = np.asarray(doc["R"], dtype=np.float64), np.asarray(doc["t"], dtype=np.float64)
    else:
        vals = np.asarray(text.split(), dtype=np.float64) if doc is None else np.ravel(doc)
        if vals.size != 12:
            raise ValueError(f"{path}: expected 12 pose entries, got {vals.size}")
        R, t = vals[:9], vals[9:]
    if R.size != 9 or t.size != 3:
        raise ValueError(f"{path}: R needs 9 entries and t 3")
    return Pose(R, t)


@dataclass(frozen=True)
class FlowField:
    """Source-view coordinates ``(u, v)`` for every target pixel."""

    u: np.ndarray
    v: np.ndarray
    z: np.ndarray  # depth of the warped point in the source camera
    valid: np.ndarray


def reproject(u, v, Z, K, pose):
    """Map target pixels with depth ``Z`` into the source view.

    Coordinates are returned as the target pixel plus a displacement so an
    identity pose reproduces the input exactly.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    xn = (u - K.cx) / K.fx
    yn = (v - K.cy) / K.fy
    R, t = pose.R, pose.t
    hx = Z * (R[0, 0] * xn + R[0, 1] * yn + R[0, 2]) + t[0]
    hy = Z * (R[1, 0] * xn + R[1, 1] * yn + R[1, 2]) + t[1]
    hz = Z * (R[2, 0] * xn + R[2, 1] * yn + R[2, 2]) + t[2]
    with np.errstate(divide="ignore", invalid="ignore"):
        us = u + K.fx * (hx - xn * hz) / hz
        vs = v + K.fy * (hy - yn * hz) / hz
    return us, vs, hz


def warp_flow(depth, K, pose):
    h, w = depth.shape
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    Z = np.where(depth.mask, depth.depth, 1.0)
    us, vs, z = reproject(u, v, Z, K, pose)
    with np.errstate(invalid="ignore"):
        valid = depth.mask & (z > 0) & (us >= 0) & (us <= w - 1) & (vs >= 0) & (vs <= h - 1)
    return FlowField(us, vs, z, valid)


def bilinear_sample(source, flow):
    """Sample ``source`` at the flow coordinates; returns (image, mask)."""
    source = np.asarray(source, dtype=np.float64)
    h, w = source.shape[:2]
    valid = flow.valid.copy()
    us = np.where(valid, flow.u, 0.0)
    vs = np.where(valid, flow.v, 0.0)
    x0 = np.floor(us).astype(np.intp)
    y0 = np.floor(vs).astype(np.intp)
    wx = us - x0
    wy = vs - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    if source.ndim == 3:
        wx, wy = wx[..., None], wy[..., None]
    out = (
        source[y0, x0] * (1 - wx) * (1 - wy)
        + source[y0, x1] * wx * (1 - wy)
        + source[y1, x0] * (1 - wx) * wy
        + source[y1, x1] * wx * wy
    )
    mask = valid if source.ndim == 2 else valid[..., None]
    return np.where(mask, out, 0.0), valid


@dataclass(frozen=True)
class PhotometricConfig:
    alpha: float = 0.85
    window: int = 3
    c1: float = 0.01 ** 2
    c2: float = 0.03 ** 2

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("SSIM window must be a positive odd size")


def _local_mean(x, size):
    # box filter with edge replication, channels filtered independently
    sizes = (size, size) + (1,) * (x.ndim - 2)
    return uniform_filter(x, size=sizes, mode="nearest")


def ssim(a, b, cfg=PhotometricConfig()):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    n = cfg.window
    mu_a = _local_mean(a, n)
    mu_b = _local_mean(b, n)
    var_a = _local_mean(a * a, n) - mu_a ** 2
    var_b = _local_mean(b * b, n) - mu_b ** 2
    cov = _local_mean(a * b, n) - mu_a * mu_b
    num = (2 * mu_a * mu_b + cfg.c1) * (2 * cov + cfg.c2)
    den = (mu_a ** 2 + mu_b ** 2 + cfg.c1) * (var_a + var_b + cfg.c2)
    return np.clip(num / den, -1.0, 1.0)


def photometric_loss(target, synthesized, cfg=PhotometricConfig(), mask=None):
    """Mean over valid pixels of ``alpha (1 - SSIM)/2 + (1 - alpha) |diff|``."""
    target = np.asarray(target, dtype=np.float64)
    synthesized = np.asarray(synthesized, dtype=np.float64)
    if target.shape != synthesized.shape:
        raise ValueError(f"shape mismatch {target.shape} vs {synthesized.shape}")
    l1 = np.abs(target - synthesized)
    err = cfg.alpha * (1 - ssim(target, synthesized, cfg)) / 2 + (1 - cfg.alpha) * l1
    if err.ndim == 3:
        err = err.mean(axis=2)
    if mask is None:
        mask = np.ones(err.shape, dtype=bool)
    if not mask.any():
        raise ValueError("photometric loss needs at least one valid pixel")
    return float(err[mask].mean())


def _image_gradients(image):
    image = np.asarray(image, dtype=np.float64)
    gx = np.abs(image[:, :-1] - image[:, 1:])
    gy = np.abs(image[:-1, :] - image[1:, :])
    if image.ndim == 3:
        gx, gy = gx.mean(axis=2), gy.mean(axis=2)
    return gx, gy


def edge_aware_smoothness(field, image):
    """``mean |d_u f| exp(-|d_u I|) + mean |d_v f| exp(-|d_v I|)`` with forward differences."""
    field = np.asarray(field, dtype=np.float64)
    if field.shape != np.shape(image)[:2]:
        raise ValueError("field and image sizes differ")
    ix, iy = _image_gradients(image)
    fx = np.abs(field[:, :-1] - field[:, 1:])
    fy = np.abs(field[:-1, :] - field[1:, :])
    total = 0.0
    if fx.size:
        total += float(np.mean(fx * np.exp(-ix)))
    if fy.size:
        total += float(np.mean(fy * np.exp(-iy)))
    return total


def disparity_smoothness(disp, image):
    disp = np.asarray(disp, dtype=np.float64)
    mean = disp.mean()
    if mean == 0:
        raise ValueError("disparity has zero mean")
    return edge_aware_smoothness(disp / mean, image)
