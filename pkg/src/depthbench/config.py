"""Run configuration: a TOML file merged with command-line overrides.

Recognised keys (everything optional)::

    data_root = "path"        seed = 0
    unit_scale = 0.001        max_depth = 50.0
    aggregation = "pooled"    # or "mean"

    [intrinsics]  fx, fy, cx, cy
    [score]       c
    [silog]       alpha, lambda
    [bench]       runs, warmup, statistic

Unknown keys are rejected.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dataio import DEFAULT_UNIT_SCALE, data_root
from .errors import ConfigError
from .losses import SilogParams
from .metrics import DEFAULT_C, ScoreParams
from .types import MAX_DEPTH_M, CameraIntrinsics

_SCHEMA = {
    "data_root": str, "seed": int, "unit_scale": float, "max_depth": float, "aggregation": str,
    "intrinsics": {"fx": float, "fy": float, "cx": float, "cy": float},
    "score": {"c": float},
    "silog": {"alpha": float, "lambda": float},
    "bench": {"runs": int, "warmup": int, "statistic": str},
}


@dataclass(frozen=True)
class Config:
    data_root: Path = field(default_factory=data_root)
    seed: int = 0
    unit_scale: float = DEFAULT_UNIT_SCALE
    max_depth: float = MAX_DEPTH_M
    aggregation: str = "pooled"
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics.default_vga)
    score: ScoreParams = field(default_factory=lambda: ScoreParams(DEFAULT_C))
    silog: SilogParams = field(default_factory=SilogParams)
    runs: int = 30
    warmup: int = 5
    statistic: str = "p50"

    def __post_init__(self):
        if self.aggregation not in ("pooled", "mean"):
            raise ConfigError(f"aggregation must be 'pooled' or 'mean', got {self.aggregation!r}")
        if self.statistic not in ("p50", "mean"):
            raise ConfigError(f"statistic must be 'p50' or 'mean', got {self.statistic!r}")
        if not self.unit_scale > 0:
            raise ConfigError("unit_scale must be positive")
        if self.runs < 1 or self.warmup < 0:
            raise ConfigError("bench needs runs >= 1 and warmup >= 0")


def _check(d: dict, schema: dict, where: str):
    for key, value in d.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {where}{key!r}")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"[{key}] must be a table")
            _check(value, expected, f"{key}.")
        elif expected is float and isinstance(value, int) and not isinstance(value, bool):
            continue
        elif not isinstance(value, expected) or isinstance(value, bool):
            raise ConfigError(f"config key {where}{key} must be {expected.__name__}")


def _apply(cfg: Config, d: dict) -> Config:
    kw = {}
    for key in ("seed", "unit_scale", "max_depth", "aggregation"):
        if key in d:
            kw[key] = d[key]
    if "data_root" in d:
        kw["data_root"] = Path(d["data_root"])
    if "intrinsics" in d:
        k = cfg.intrinsics
        kw["intrinsics"] = CameraIntrinsics(**{a: float(d["intrinsics"].get(a, getattr(k, a)))
                                               for a in ("fx", "fy", "cx", "cy")})
    if "c" in d.get("score", {}):
        try:
            kw["score"] = ScoreParams(float(d["score"]["c"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if "silog" in d:
        s = d["silog"]
        try:
            kw["silog"] = SilogParams(float(s.get("alpha", cfg.silog.alpha)), float(s.get("lambda", cfg.silog.lam)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    for key in ("runs", "warmup", "statistic"):
        if key in d.get("bench", {}):
            kw[key] = d["bench"][key]
    return replace(cfg, **kw)


def load_config(path=None, overrides: dict | None = None) -> Config:
    """Defaults <- config file <- overrides (same nested layout as the file)."""
    cfg = Config()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                d = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        _check(d, _SCHEMA, "")
        cfg = _apply(cfg, d)
    if overrides:
        _check(overrides, _SCHEMA, "")
        cfg = _apply(cfg, overrides)
    return cfg
