"""Forward-only reference implementations of the training losses.

Every function takes numpy arrays or :class:`~depthbench.types.DepthMap`
objects and returns a Python float. Nothing here computes gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask, InsufficientGeometry, NonPositiveDepth, ShapeError
from .rng import make_rng
from .types import CameraIntrinsics, DepthMap, unproject

NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class SilogParams:
    alpha: float = 10.0
    lam: float = 0.85

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("silog alpha must be positive")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("silog lambda must lie in [0, 1]")


@dataclass(frozen=True)
class RobustParams:
    alpha: float = 1.0
    c: float = 2.0
    as_printed: bool = False

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("robust scale c must be positive")


@dataclass(frozen=True)
class DepthLossWeights:
    w1: float = 1.0
    w2: float = 0.25
    w3: float = 2.5
    w4: float = 0.6
    w_distill: float = 10.0

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3, self.w4, self.w_distill) < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class VnlParams:
    n_triplets: int | None = None
    min_pixel_dist: float = 3.0
    min_angle_deg: float = 5.0


def _as_depth(d) -> DepthMap:
    return d if isinstance(d, DepthMap) else DepthMap.from_array(d, max_depth=np.inf)


def _masked_pair(pred, gt):
    pred, gt = _as_depth(pred), _as_depth(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    return pred, gt, pred.valid & gt.valid


def log_residuals(pred, gt) -> np.ndarray:
    """e_i = ln(pred_i) - ln(gt_i) over pixels valid in both maps."""
    if isinstance(pred, DepthMap):
        pred_v, gt_d = pred.values, _as_depth(gt)
        mask = pred.valid & gt_d.valid
    else:
        pred_v = np.asarray(pred, dtype=np.float64)
        gt_d = _as_depth(gt)
        if pred_v.shape != gt_d.shape:
            raise ShapeError(f"shape mismatch: {pred_v.shape} vs {gt_d.shape}")
        mask = gt_d.valid
    if pred_v.shape != gt_d.shape:
        raise ShapeError(f"shape mismatch: {pred_v.shape} vs {gt_d.shape}")
    if not mask.any():
        raise EmptyMask("no pixel is valid in both depth maps")
    p = pred_v[mask]
    if np.any(p <= 0):
        raise NonPositiveDepth("log losses need strictly positive predicted depth")
    return np.log(p) - np.log(gt_d.values[mask])


def silog_loss(pred, gt, p: SilogParams = SilogParams()) -> float:
    e = log_residuals(pred, gt)
    mu = e.mean()
    # sum(e^2)/N - lam*mu^2 rewritten as var + (1 - lam)*mu^2 to avoid cancellation.
    radicand = np.mean((e - mu) ** 2) + (1.0 - p.lam) * mu * mu
    return float(p.alpha * math.sqrt(max(radicand, 0.0)))


def gradient_loss(pred, gt) -> float:
    """Mean L1 gap between forward-difference gradients.

    A position contributes |dx gap| when it and its right neighbour are valid
    in both maps, and |dy gap| likewise for the pixel below. T counts the
    positions contributing at least one term.
    """
    pred, gt, m = _masked_pair(pred, gt)
    p, g = pred.values, gt.values
    h, w = p.shape
    total = 0.0
    has_term = np.zeros((h, w), dtype=bool)
    if w > 1:
        mx = m[:, :-1] & m[:, 1:]
        gx = np.abs(np.diff(p, axis=1) - np.diff(g, axis=1))
        total += float(gx[mx].sum())
        has_term[:, :-1] |= mx
    if h > 1:
        my = m[:-1, :] & m[1:, :]
        gy = np.abs(np.diff(p, axis=0) - np.diff(g, axis=0))
        total += float(gy[my].sum())
        has_term[:-1, :] |= my
    t = int(has_term.sum())
    if t == 0:
        raise EmptyMask("no valid forward-difference position")
    return total / t


def default_triplet_count(n_valid: int) -> int:
    return max(1, min(100_000, int(100 * min(1.0, n_valid / 1e4) * 1e3)))


def unit_normals(p0: np.ndarray, p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Unit normals of triangles (..., 3) with a canonical orientation.

    The sign is chosen so the z component is positive; ties fall back to y,
    then x.
    """
    n = np.cross(p1 - p0, p2 - p0)
    n = n / np.maximum(np.linalg.norm(n, axis=-1, keepdims=True), NORM_FLOOR)
    x, y, z = n[..., 0], n[..., 1], n[..., 2]
    flip = (z < 0) | ((z == 0) & ((y < 0) | ((y == 0) & (x < 0))))
    return np.where(flip[..., None], -n, n)


def _min_angle_deg(a, b, c) -> np.ndarray:
    """Smallest interior angle of each triangle (a, b, c), in degrees."""
    def ang(p, q, r):
        u, v = q - p, r - p
        nu = np.linalg.norm(u, axis=-1)
        nv = np.linalg.norm(v, axis=-1)
        cos = np.sum(u * v, axis=-1) / np.maximum(nu * nv, NORM_FLOOR)
        return np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return np.minimum(np.minimum(ang(a, b, c), ang(b, c, a)), ang(c, a, b))


def sample_triplets(pred, gt, k: CameraIntrinsics, seed=0, params: VnlParams = VnlParams()):
    """Draw point triplets for the virtual-normal loss.

    Draw order: one ``integers(0, N, size=(n, 3))`` call over the flattened
    list of pixels valid in both maps (row-major order). A triplet is kept when
    every pair of pixels is at least ``min_pixel_dist`` apart and the smallest
    triangle angle is at least ``min_angle_deg`` in both point clouds.

    Returns ``(pred_points, gt_points, idx)`` where the point arrays are
    (M, 3, 3) and ``idx`` holds the accepted flat pixel indices, shape (M, 3).
    """
    pred, gt, m = _masked_pair(pred, gt)
    flat = np.flatnonzero(m.ravel())
    if flat.size < 3:
        raise InsufficientGeometry("need at least 3 valid pixels")
    n = params.n_triplets or default_triplet_count(flat.size)
    rng = make_rng(seed)
    pick = flat[rng.integers(0, flat.size, size=(n, 3))]

    w = m.shape[1]
    rows, cols = pick // w, pick % w
    ok = np.ones(n, dtype=bool)
    for a, b in ((0, 1), (1, 2), (0, 2)):
        dist = np.hypot(rows[:, a] - rows[:, b], cols[:, a] - cols[:, b])
        ok &= dist >= params.min_pixel_dist

    pc_pred, _ = unproject(pred, k)
    pc_gt, _ = unproject(gt, k)
    tp = pc_pred.reshape(-1, 3)[pick]
    tg = pc_gt.reshape(-1, 3)[pick]
    for t in (tp, tg):
        ok &= _min_angle_deg(t[:, 0], t[:, 1], t[:, 2]) >= params.min_angle_deg
    if not ok.any():
        raise InsufficientGeometry("no triplet passed the distance/collinearity filters")
    return tp[ok], tg[ok], pick[ok]


def vnl_loss(pred, gt, k: CameraIntrinsics, seed=0, n_triplets: int | None = None,
             params: VnlParams | None = None) -> float:
    """Mean L1 distance between unit normals of matched point triplets."""
    if params is None:
        params = VnlParams(n_triplets=n_triplets)
    elif n_triplets is not None:
        params = VnlParams(n_triplets, params.min_pixel_dist, params.min_angle_deg)
    tp, tg, _ = sample_triplets(pred, gt, k, seed, params)
    n_pred = unit_normals(tp[:, 0], tp[:, 1], tp[:, 2])
    n_gt = unit_normals(tg[:, 0], tg[:, 1], tg[:, 2])
    return float(np.mean(np.sum(np.abs(n_pred - n_gt), axis=-1)))


def robust_loss(residual, p: RobustParams = RobustParams()) -> float:
    """Mean of the general robust loss over all elements of ``residual``.

    The default form is |a-2|/a * (((x/c)^2/|a-2| + 1)^(a/2) - 1) with the
    analytic limits at a=2 (half squared error) and a=0 (log). With
    ``as_printed=True`` the "+1" inside the power is dropped.
    """
    return float(np.mean(robust_elementwise(residual, p)))


def robust_elementwise(residual, p: RobustParams = RobustParams()) -> np.ndarray:
    x = np.asarray(residual, dtype=np.float64)
    a = float(p.alpha)
    z = (x / p.c) ** 2
    if p.as_printed:
        if a == 0 or a == 2:
            raise ValueError("the as-printed form is undefined at alpha in {0, 2}")
        b = abs(a - 2)
        return b / a * ((z / b) ** (a / 2) - 1)
    if a == 2:
        return 0.5 * z
    if a == 0:
        return np.log1p(0.5 * z)
    b = abs(a - 2)
    # b/a * expm1(a/2 * log1p(z/b)), arranged to stay finite as a -> 0.
    lg = np.log1p(z / b)
    t = 0.5 * a * lg
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(t == 0, 1.0, np.expm1(t) / t)
    return 0.5 * b * lg * ratio


def depth_loss(pred, gt, k: CameraIntrinsics, weights: DepthLossWeights = DepthLossWeights(),
               silog: SilogParams = SilogParams(), robust: RobustParams = RobustParams(),
               vnl_seed=0, n_triplets: int | None = None, return_terms: bool = False):
    """Weighted sum of SILog, gradient, virtual-normal and robust terms.

    The robust term is applied to the log-depth residuals. Terms with zero
    weight are skipped entirely.
    """
    terms = {}
    if weights.w1:
        terms["silog"] = silog_loss(pred, gt, silog)
    if weights.w2:
        terms["grad"] = gradient_loss(pred, gt)
    if weights.w3:
        terms["vnl"] = vnl_loss(pred, gt, k, vnl_seed, n_triplets)
    if weights.w4:
        terms["robust"] = robust_loss(log_residuals(pred, gt), robust)
    w = {"silog": weights.w1, "grad": weights.w2, "vnl": weights.w3, "robust": weights.w4}
    total = 0.0
    for name, value in terms.items():
        total += w[name] * value
    return (total, terms) if return_terms else total


def _feature_rows(features) -> np.ndarray:
    f = np.asarray(features, dtype=np.float64)
    if f.ndim == 4:
        if f.shape[0] != 1:
            raise ShapeError("affinity expects a single feature map")
        f = f[0]
    if f.ndim != 3:
        raise ShapeError(f"feature map must be h x w x c, got {f.shape}")
    return f.reshape(-1, f.shape[-1])


def pairwise_affinity(features) -> np.ndarray:
    """(h*w) x (h*w) cosine similarity between the feature vectors of all positions."""
    f = _feature_rows(features)
    norms = np.maximum(np.linalg.norm(f, axis=1), NORM_FLOOR)
    u = f / norms[:, None]
    a = u @ u.T
    np.fill_diagonal(a, 1.0)
    return a


def pairwise_distill_loss(student, teacher) -> float:
    """Squared affinity gap summed over all position pairs, divided by h*w."""
    s = np.asarray(student)
    t = np.asarray(teacher)
    s3 = s[0] if s.ndim == 4 else s
    t3 = t[0] if t.ndim == 4 else t
    if s3.shape[:2] != t3.shape[:2]:
        raise ShapeError(f"spatial extents differ: {s3.shape[:2]} vs {t3.shape[:2]}")
    h, w = s3.shape[:2]
    d = pairwise_affinity(s3) - pairwise_affinity(t3)
    return float(np.sum(d * d) / (h * w))


def multilevel_distill_loss(pairs, layer_weights=None) -> float:
    """Weighted sum of pairwise distillation over ``(student, teacher)`` layer pairs."""
    pairs = list(pairs)
    if layer_weights is None:
        layer_weights = [1.0] * len(pairs)
    if len(layer_weights) != len(pairs):
        raise ValueError("one weight per layer pair is required")
    return float(sum(wt * pairwise_distill_loss(s, t) for wt, (s, t) in zip(layer_weights, pairs)))


def stage2_loss(depth_term: float, distill_term: float, w_distill: float = 10.0) -> float:
    if w_distill < 0:
        raise ValueError("distillation weight must be non-negative")
    return depth_term + w_distill * distill_term
