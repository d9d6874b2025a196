"""Camera intrinsics, pixel/ray conversions, depth maps and raster file I/O.

Pixel centers sit at integer coordinates with the origin at the top-left
pixel; ``u`` runs along columns and ``v`` along rows.
"""
import json
import math
import re
from dataclasses import dataclass

import numpy as np


class PFMError(ValueError):
    pass


class IntrinsicsError(ValueError):
    pass


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            if not math.isfinite(getattr(self, name)):
                raise IntrinsicsError(f"{name} must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise IntrinsicsError("focal lengths must be positive")

    @property
    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def check_shape(self, height, width):
        if self.width is not None and self.width != width:
            raise IntrinsicsError(f"intrinsics width {self.width} != raster width {width}")
        if self.height is not None and self.height != height:
            raise IntrinsicsError(f"intrinsics height {self.height} != raster height {height}")


@dataclass(frozen=True)
class DepthMap:
    """Depth in meters; ``mask`` marks valid pixels (depth > 0)."""

    depth: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        if self.depth.shape != self.mask.shape or self.depth.ndim != 2:
            raise ValueError("depth and mask must be 2-D arrays of the same shape")
        if np.any(self.depth[self.mask] <= 0) or not np.all(np.isfinite(self.depth[self.mask])):
            raise ValueError("valid depths must be finite and positive")

    @classmethod
    def from_array(cls, depth):
        """Zero, negative or non-finite entries become invalid."""
        depth = np.asarray(depth, dtype=np.float64)
        mask = np.isfinite(depth) & (depth > 0)
        return cls(np.where(mask, depth, 0.0), mask)

    @property
    def shape(self):
        return self.depth.shape


def normalize_pixel(u, v, K):
    """Normalized image coordinate ``K^-1 (u, v, 1)``; broadcasts over arrays."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x = (u - K.cx) / K.fx
    y = (v - K.cy) / K.fy
    return np.stack(np.broadcast_arrays(x, y, np.ones_like(x + y)), axis=-1)


def denormalize(pn, K):
    pn = np.asarray(pn, dtype=np.float64)
    return pn[..., 0] * K.fx + K.cx, pn[..., 1] * K.fy + K.cy


def normalized_grid(K, height, width):
    """(H, W, 3) array of normalized coordinates for every pixel."""
    v, u = np.mgrid[0:height, 0:width].astype(np.float64)
    return normalize_pixel(u, v, K)


def backproject(u, v, Z, K):
    Z = np.asarray(Z, dtype=np.float64)
    if np.any(~(Z > 0)):
        raise ValueError("depth must be positive to backproject")
    return normalize_pixel(u, v, K) * Z[..., None]


def project(points, K):
    points = np.asarray(points, dtype=np.float64)
    z = points[..., 2]
    return K.fx * points[..., 0] / z + K.cx, K.fy * points[..., 1] / z + K.cy


def depth_to_points(depth, K, flat_index=None):
    """Backproject pixels of ``depth`` (a DepthMap) given as flat row-major indices."""
    h, w = depth.shape
    if flat_index is None:
        flat_index = np.flatnonzero(depth.mask)
    flat_index = np.asarray(flat_index, dtype=np.intp)
    v, u = np.divmod(flat_index, w)
    return backproject(u, v, depth.depth.ravel()[flat_index], K)


# --------------------------------------------------------------------------
# file formats


def read_pfm(path):
    """Read a PFM file into a float32 array of shape (H, W) or (H, W, 3)."""
    with open(path, "rb") as f:
        data = f.read()
    # header: magic, dims, scale; each token separated by whitespace
    if data[:2] not in (b"PF", b"Pf"):
        raise PFMError(f"{path}: not a PFM file (magic {data[:2]!r})")
    m = re.match(rb"(P[Ff])\s+(\d+)\s+(\d+)\s+([-+0-9.eE]+)\s", data)
    if m is None:
        raise PFMError(f"{path}: malformed PFM header")
    magic, width, height, scale = m.group(1), int(m.group(2)), int(m.group(3)), m.group(4)
    channels = 3 if magic == b"PF" else 1
    try:
        scale = float(scale)
    except ValueError:
        raise PFMError(f"{path}: bad scale field") from None
    if scale == 0 or not math.isfinite(scale):
        raise PFMError(f"{path}: scale must be non-zero and finite")
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    count = width * height * channels
    payload = data[m.end():]
    if len(payload) < count * 4:
        raise PFMError(f"{path}: truncated payload ({len(payload)} of {count * 4} bytes)")
    arr = np.frombuffer(payload, dtype=dtype, count=count).astype(np.float32)
    shape = (height, width, 3) if channels == 3 else (height, width)
    # rows are stored bottom-to-top
    return np.ascontiguousarray(np.flipud(arr.reshape(shape)))


def write_pfm(path, raster, little_endian=True):
    raster = np.asarray(raster)
    if raster.ndim == 3 and raster.shape[2] == 1:
        raster = raster[:, :, 0]
    if raster.ndim == 2:
        magic = "Pf"
    elif raster.ndim == 3 and raster.shape[2] == 3:
        magic = "PF"
    else:
        raise PFMError(f"unsupported raster shape {raster.shape}; need 1 or 3 channels")
    height, width = raster.shape[:2]
    dtype = "<f4" if little_endian else ">f4"
    body = np.flipud(raster).astype(dtype).tobytes()
    scale = "-1.0" if little_endian else "1.0"
    with open(path, "wb") as f:
        f.write(f"{magic}\n{width} {height}\n{scale}\n".encode("ascii"))
        f.write(body)


def _parse_key_values(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        doc = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            m = re.match(r"([^:=]+?)\s*[:=]\s*(.*)$", line)
            if m is None:
                raise IntrinsicsError(f"cannot parse line {line!r}")
            doc[m.group(1)] = m.group(2)
    if not isinstance(doc, dict):
        raise IntrinsicsError("intrinsics document must be a mapping")
    return doc


def read_intrinsics(path, shape=None):
    """Load fx, fy, cx, cy (plus optional width/height) from JSON or ``key: value`` text.

    Unknown keys are ignored. When ``shape`` (H, W) is given and the file
    carries dimensions, they must agree.
    """
    with open(path, encoding="utf-8") as f:
        doc = _parse_key_values(f.read())
    try:
        vals = {k: float(doc[k]) for k in ("fx", "fy", "cx", "cy")}
    except KeyError as e:
        raise IntrinsicsError(f"{path}: missing key {e.args[0]}") from None
    except (TypeError, ValueError) as e:
        raise IntrinsicsError(f"{path}: {e}") from None
    dims = {}
    for k in ("width", "height"):
        if k in doc:
            dims[k] = int(float(doc[k]))
    K = Intrinsics(**vals, **dims)
    if shape is not None:
        K.check_shape(*shape)
    return K


def read_image(path):
    """Load an 8-bit image (or PFM) as float64 intensities in [0, 1]."""
    path = str(path)
    if path.lower().endswith(".pfm"):
        return read_pfm(path).astype(np.float64)
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64)
    return arr / 255.0


def read_depth(path):
    return DepthMap.from_array(read_pfm(path))
