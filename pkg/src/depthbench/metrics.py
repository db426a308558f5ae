"""Fidelity metrics and the leaderboard score."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, EmptyMask, NonPositiveDepth, ShapeError
from .types import DepthMap

log = logging.getLogger(__name__)

LOG_FLOOR_M = 1e-6
SCORE_EXPONENT = 20.0

# Reference row used to calibrate the normalization constant C: the winning
# entry's (si-RMSE, runtime ms, reported score).
TCL_ROW = (0.2773, 46.0, 298.0)

EVAL_SCHEMA = "depthbench.eval/1"
CSV_COLUMNS = ("image_id", "rmse", "si_rmse", "log10", "rel", "n_valid")


def _pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    """Return the (pred, gt) values over the shared mask.

    ``pred`` may be a DepthMap (its own mask is intersected) or a raw array
    (only the ground-truth mask applies, so bad predictions are not dropped).
    """
    if not isinstance(gt, DepthMap):
        gt = DepthMap.from_array(gt)
    if isinstance(pred, DepthMap):
        if pred.shape != gt.shape:
            raise ShapeError(f"shape mismatch: {pred.shape} vs {gt.shape}")
        mask = pred.valid & gt.valid
        p = pred.values
    else:
        p = np.asarray(pred, dtype=np.float64)
        if p.shape != gt.shape:
            raise ShapeError(f"shape mismatch: {p.shape} vs {gt.shape}")
        mask = gt.valid & np.isfinite(p)
    if not mask.any():
        raise EmptyMask("no pixel is valid in both depth maps")
    return p[mask], gt.values[mask]


def _positive(p: np.ndarray, on_nonpositive: str) -> np.ndarray:
    bad = p <= 0
    if bad.any():
        if on_nonpositive == "raise":
            raise NonPositiveDepth(f"{int(bad.sum())} masked-in predictions are <= 0")
        log.warning("clamping %d non-positive predictions to %g m", int(bad.sum()), LOG_FLOOR_M)
        p = np.where(bad, LOG_FLOOR_M, p)
    return p


def _log_errors(pred, gt, on_nonpositive="clamp") -> np.ndarray:
    p, g = _pair(pred, gt)
    return np.log(_positive(p, on_nonpositive)) - np.log(g)


def rmse(pred, gt) -> float:
    p, g = _pair(pred, gt)
    return float(np.sqrt(np.mean((p - g) ** 2)))


def si_rmse_from_log_errors(e: np.ndarray) -> float:
    n = e.size
    mean = e.sum() / n
    # Centered form avoids the cancellation of E[e^2] - E[e]^2.
    return float(np.sqrt(np.sum((e - mean) ** 2) / n))


def si_rmse(pred, gt, on_nonpositive: str = "clamp") -> float:
    """Scale-invariant RMSE: standard deviation of natural-log depth errors."""
    return si_rmse_from_log_errors(_log_errors(pred, gt, on_nonpositive))


def log10_err(pred, gt, on_nonpositive: str = "clamp") -> float:
    p, g = _pair(pred, gt)
    p = _positive(p, on_nonpositive)
    return float(np.mean(np.abs(np.log10(p) - np.log10(g))))


def rel_err(pred, gt) -> float:
    p, g = _pair(pred, gt)
    return float(np.mean(np.abs(p - g) / g))


@dataclass(frozen=True)
class ScoreParams:
    normalization_c: float
    exponent_coeff: float = SCORE_EXPONENT

    def __post_init__(self):
        if not self.normalization_c > 0:
            raise DomainError("normalization constant C must be positive")
        if self.exponent_coeff != SCORE_EXPONENT:
            raise DomainError("the score exponent coefficient is fixed at 20")


def final_score(si_rmse: float, runtime_ms: float, params: ScoreParams) -> float:
    """2^(-20 si_rmse) / (C * runtime_ms)."""
    if not runtime_ms > 0:
        raise DomainError(f"runtime must be positive, got {runtime_ms}")
    return 2.0 ** (-params.exponent_coeff * si_rmse) / (params.normalization_c * runtime_ms)


def calibrate_c(si_rmse: float, runtime_ms: float, reported_score: float) -> float:
    """Invert :func:`final_score` for C given one published leaderboard row."""
    if not (si_rmse > 0 and runtime_ms > 0 and reported_score > 0):
        raise DomainError("calibration inputs must be positive")
    return 2.0 ** (-SCORE_EXPONENT * si_rmse) / (runtime_ms * reported_score)


DEFAULT_C = calibrate_c(*TCL_ROW)


def default_score_params() -> ScoreParams:
    return ScoreParams(normalization_c=DEFAULT_C)


@dataclass(frozen=True)
class ImageMetrics:
    image_id: str
    rmse: float
    si_rmse: float
    log10: float
    rel: float
    n_valid: int


@dataclass
class EvalReport:
    rmse: float
    si_rmse: float
    log10_err: float
    rel_err: float
    n_valid: int
    aggregation: str = "pooled"
    per_image: list[ImageMetrics] = field(default_factory=list)

    def __post_init__(self):
        vals = (self.rmse, self.si_rmse, self.log10_err, self.rel_err)
        if not all(math.isfinite(v) and v >= 0 for v in vals):
            raise ValueError(f"metric values must be finite and >= 0: {vals}")
        if self.n_valid < 1:
            raise EmptyMask("report needs at least one valid pixel")

    def to_json(self) -> str:
        d = {"schema": EVAL_SCHEMA, **asdict(self)}
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {EVAL_SCHEMA}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for m in self.per_image:
            w.writerow([m.image_id, repr(m.rmse), repr(m.si_rmse), repr(m.log10), repr(m.rel), m.n_valid])
        w.writerow(["__all__", repr(self.rmse), repr(self.si_rmse), repr(self.log10_err),
                    repr(self.rel_err), self.n_valid])
        return buf.getvalue()


def evaluate_image(image_id: str, pred, gt, on_nonpositive: str = "clamp") -> ImageMetrics:
    p, g = _pair(pred, gt)
    p_pos = _positive(p, on_nonpositive)
    e = np.log(p_pos) - np.log(g)
    return ImageMetrics(
        image_id=image_id,
        rmse=float(np.sqrt(np.mean((p - g) ** 2))),
        si_rmse=si_rmse_from_log_errors(e),
        log10=float(np.mean(np.abs(np.log10(p_pos) - np.log10(g)))),
        rel=float(np.mean(np.abs(p - g) / g)),
        n_valid=int(p.size),
    )


def evaluate_batch(pairs, aggregation: str = "pooled", on_nonpositive: str = "clamp") -> EvalReport:
    """Evaluate an iterable of ``(image_id, pred, gt)`` triples.

    ``aggregation="pooled"`` computes every metric over the union of valid
    pixels of all images; ``"mean"`` averages the per-image values. Images are
    reduced in input order so aggregates are bit-stable.
    """
    if aggregation not in ("pooled", "mean"):
        raise ValueError(f"unknown aggregation {aggregation!r}")
    per_image, ps, gs = [], [], []
    for image_id, pred, gt in pairs:
        p, g = _pair(pred, gt)
        ps.append(p)
        gs.append(g)
        per_image.append(evaluate_image(image_id, pred, gt, on_nonpositive))
    if not per_image:
        raise EmptyMask("no image pairs to evaluate")
    n = sum(m.n_valid for m in per_image)
    if aggregation == "mean":
        k = len(per_image)
        return EvalReport(
            rmse=math.fsum(m.rmse for m in per_image) / k,
            si_rmse=math.fsum(m.si_rmse for m in per_image) / k,
            log10_err=math.fsum(m.log10 for m in per_image) / k,
            rel_err=math.fsum(m.rel for m in per_image) / k,
            n_valid=n, aggregation="mean", per_image=per_image,
        )
    p = np.concatenate(ps)
    g = np.concatenate(gs)
    p_pos = np.where(p <= 0, LOG_FLOOR_M, p)
    e = np.log(p_pos) - np.log(g)
    return EvalReport(
        rmse=float(np.sqrt(np.mean((p - g) ** 2))),
        si_rmse=si_rmse_from_log_errors(e),
        log10_err=float(np.mean(np.abs(np.log10(p_pos) - np.log10(g)))),
        rel_err=float(np.mean(np.abs(p - g) / g)),
        n_valid=n, aggregation="pooled", per_image=per_image,
    )
