"""Core value types: depth maps, RGB images, camera intrinsics.

Tensors are plain ``numpy.ndarray`` objects in batch-height-width-channels
(NHWC) row-major layout; see :func:`as_tensor`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask, ShapeError

MAX_DEPTH_M = 50.0


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DepthMap:
    """H x W metric depth (meters) with a per-pixel validity mask.

    Invalid pixels always store 0.0 so that no NaN ever enters downstream data.
    """

    values: np.ndarray
    valid: np.ndarray
    max_depth: float = MAX_DEPTH_M

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if values.ndim != 2:
            raise ShapeError(f"depth values must be 2-D, got shape {values.shape}")
        if valid.shape != values.shape:
            raise ShapeError(f"mask shape {valid.shape} != values shape {values.shape}")
        v = values[valid]
        if v.size and not (np.all(v > 0) and np.all(v <= self.max_depth)):
            raise ValueError(f"valid depths must lie in (0, {self.max_depth}]")
        values = np.where(valid, values, 0.0)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "valid", _frozen(valid))

    @classmethod
    def from_array(cls, values, max_depth: float = MAX_DEPTH_M) -> "DepthMap":
        """Mark pixels valid where 0 < value <= max_depth and finite."""
        values = np.asarray(values, dtype=np.float64)
        with np.errstate(invalid="ignore"):
            valid = np.isfinite(values) & (values > 0) & (values <= max_depth)
        return cls(np.where(valid, values, 0.0), valid, max_depth)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())

    def scaled(self, s: float) -> "DepthMap":
        """Uniformly rescale depths; the cap is scaled too so no pixel drops out."""
        return DepthMap(self.values * s, self.valid, self.max_depth * max(s, 1.0))


@dataclass(frozen=True, eq=False)
class RgbImage:
    """H x W x 3 image with intensities in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 3 or values.shape[2] != 3:
            raise ShapeError(f"RGB image must be H x W x 3, got {values.shape}")
        if values.size and (values.min() < 0 or values.max() > 1):
            raise ValueError("RGB intensities must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def to_tensor(self) -> np.ndarray:
        return self.values[None].copy()


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")

    @classmethod
    def default_vga(cls) -> "CameraIntrinsics":
        # Placeholder pinhole model at 640x480; override from config for real data.
        return cls(fx=500.0, fy=500.0, cx=319.5, cy=239.5)


def as_tensor(a, ndim: int = 4) -> np.ndarray:
    """Coerce to a float32 NHWC tensor, promoting H x W x C input to N=1."""
    a = np.asarray(a, dtype=np.float32)
    if a.ndim == 3 and ndim == 4:
        a = a[None]
    if a.ndim != ndim:
        raise ShapeError(f"expected a {ndim}-D tensor, got shape {a.shape}")
    if any(d < 1 for d in a.shape):
        raise ShapeError(f"tensor extents must be >= 1, got {a.shape}")
    return np.ascontiguousarray(a)


def _check_same_shape(a: DepthMap, b: DepthMap):
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def validity_intersection(pred: DepthMap, gt: DepthMap) -> tuple[np.ndarray, int]:
    """Pixels valid in both maps, with their count."""
    _check_same_shape(pred, gt)
    mask = pred.valid & gt.valid
    n = int(mask.sum())
    if n == 0:
        raise EmptyMask("no pixel is valid in both depth maps")
    return mask, n


def unproject(depth: DepthMap, k: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray]:
    """Back-project every pixel to camera space.

    Returns an H x W x 3 float64 point cloud and the validity mask; invalid
    pixels hold (0, 0, 0) and must be filtered with the mask.
    """
    if depth.n_valid == 0:
        raise EmptyMask("depth map has no valid pixel")
    h, w = depth.shape
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    d = depth.values
    pts = np.stack([(u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d], axis=-1)
    return pts, depth.valid


def project(points: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    """Perspective projection of (..., 3) points to (..., 3) arrays of (u, v, depth)."""
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    return np.stack([x * k.fx / z + k.cx, y * k.fy / z + k.cy, z], axis=-1)
