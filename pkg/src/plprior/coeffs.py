"""Planar-coefficient depth parameterization.

A plane that does not pass through the camera center can be written as
``co . X = 1``; dotting ``co`` with a pixel's normalized coordinate gives that
pixel's inverse depth. Coefficients carry units of 1/m.
"""
import numpy as np

from .imaging import DepthMap, normalized_grid

INV_DEPTH_EPS = 1e-4


def modulate(raw, pn):
    """Rotate a raw coefficient vector halfway toward the viewing ray.

    Returns ``raw + |raw| / |pn| * pn``. The result bisects the angle
    between ``raw`` and ``pn``, so its dot product with ``pn`` is positive
    unless ``raw`` is exactly antiparallel (then the result is zero).
    Broadcasts over leading axes.
    """
    raw = np.asarray(raw, dtype=np.float64)
    pn = np.asarray(pn, dtype=np.float64)
    scale = np.linalg.norm(raw, axis=-1, keepdims=True) / np.linalg.norm(pn, axis=-1, keepdims=True)
    return raw + scale * pn


def coeffs_to_inv_depth(co, pn, eps=INV_DEPTH_EPS):
    co = np.asarray(co, dtype=np.float64)
    pn = np.asarray(pn, dtype=np.float64)
    inv = co[..., 0] * pn[..., 0] + co[..., 1] * pn[..., 1] + co[..., 2] * pn[..., 2]
    return np.maximum(inv, eps)


def plane_to_coeffs(normal, offset):
    """Coefficients of the plane ``normal . X = offset``."""
    if offset == 0:
        raise ValueError("plane through the camera center has no planar coefficients")
    return np.asarray(normal, dtype=np.float64) / float(offset)


def coeff_map_to_depth(coeffs, K):
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 3 or coeffs.shape[2] != 3:
        raise ValueError(f"coefficient map must be (H, W, 3), got {coeffs.shape}")
    h, w = coeffs.shape[:2]
    K.check_shape(h, w)
    depth = 1.0 / coeffs_to_inv_depth(coeffs, normalized_grid(K, h, w))
    return DepthMap(depth, np.ones((h, w), dtype=bool))


def constant_coeff_map(co, height, width):
    return np.broadcast_to(np.asarray(co, dtype=np.float64), (height, width, 3)).copy()
