"""Monocular depth benchmarking: metrics, losses, a small NHWC engine, and a latency harness."""
from .errors import DepthBenchError
from .metrics import EvalReport, evaluate_batch, final_score, si_rmse
from .types import CameraIntrinsics, DepthMap, RgbImage

__version__ = "0.1.0"

__all__ = [
    "CameraIntrinsics", "DepthBenchError", "DepthMap", "EvalReport", "RgbImage",
    "evaluate_batch", "final_score", "si_rmse",
]
