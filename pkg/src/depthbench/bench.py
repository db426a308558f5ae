"""Single-image latency measurement and challenge scoring of a timed run."""
from __future__ import annotations

import json
import math
import platform
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

from .metrics import EvalReport, ScoreParams, final_score

LATENCY_SCHEMA = "depthbench.latency/1"
# Allowed overshoot of time.sleep-based stubs above the requested delay.
SCHEDULER_TOLERANCE_MS = 5.0


def percentile(samples, q: float) -> float:
    """Nearest-rank percentile: the ceil(q/100 * n)-th smallest sample."""
    if not samples:
        raise ValueError("percentile of an empty sample list")
    if not 0 <= q <= 100:
        raise ValueError("q must lie in [0, 100]")
    s = sorted(samples)
    rank = max(1, math.ceil(q / 100.0 * len(s)))
    return s[rank - 1]


def host_descriptor() -> str:
    return f"{platform.system()} {platform.machine()} python{platform.python_version()}"


@dataclass
class LatencyReport:
    samples: list[float]
    warmup_count: int
    environment: str = ""
    statistic: str = "p50"
    p50: float = field(init=False)
    p90: float = field(init=False)
    p99: float = field(init=False)
    mean: float = field(init=False)
    min: float = field(init=False)

    def __post_init__(self):
        if not self.samples:
            raise ValueError("a latency report needs at least one sample")
        if self.statistic not in ("p50", "mean"):
            raise ValueError("statistic must be 'p50' or 'mean'")
        self.p50 = percentile(self.samples, 50)
        self.p90 = percentile(self.samples, 90)
        self.p99 = percentile(self.samples, 99)
        self.mean = statistics.fmean(self.samples)
        self.min = min(self.samples)

    @property
    def central(self) -> float:
        return getattr(self, self.statistic)

    def to_dict(self) -> dict:
        return {"schema": LATENCY_SCHEMA, **asdict(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def time_callable(fn: Callable[[], object], runs: int = 30, warmup: int = 5,
                  clock=time.perf_counter) -> list[float]:
    """Wall-time ``fn`` ``warmup + runs`` times; return the last ``runs`` in ms."""
    if runs < 1 or warmup < 0:
        raise ValueError("need runs >= 1 and warmup >= 0")
    samples = []
    for i in range(warmup + runs):
        t0 = clock()
        fn()
        dt = (clock() - t0) * 1000.0
        if i >= warmup:
            samples.append(dt)
    return samples


def time_inference(model, image, runs: int = 30, warmup: int = 5, weights=None,
                   statistic: str = "p50", backend=None) -> LatencyReport:
    """Time repeated single-image inference on one fixed input.

    ``model`` is either a ready :class:`~depthbench.engine.graph.Engine` (or any
    object with ``run_raw``) or a GraphSpec together with ``weights``. Engine
    construction is not timed.
    """
    if weights is not None:
        from .engine.graph import Engine

        model = Engine(model, weights, backend=backend)
    samples = time_callable(lambda: model.run_raw(image), runs, warmup)
    return LatencyReport(samples, warmup, host_descriptor(), statistic)


def score_run(latency: LatencyReport, report: EvalReport | float, params: ScoreParams) -> float:
    si = report.si_rmse if isinstance(report, EvalReport) else float(report)
    return final_score(si, latency.central, params)
