"""Compare the numpy and compiled convolution backends.

Usage: python benchmarks/bench_kernels.py [--runs N] [--json PATH]
"""
import argparse
import json
import sys

import numpy as np

from depthbench import bench
from depthbench.engine import kernels
from depthbench.engine.graph import Engine
from depthbench.engine.zoo import random_weights, tcl_tiny
from depthbench.rng import make_rng
from depthbench.types import RgbImage

# (label, input NHWC, kernel HWIO or HWC, stride, padding, dilation)
CASES = [
    ("conv3x3 s2 3->16 @128x160", (1, 128, 160, 3), (3, 3, 3, 16), 2, 1, 1),
    ("conv1x1 16->64 @64x80", (1, 64, 80, 16), (1, 1, 16, 64), 1, 0, 1),
    ("conv3x3 d2 48->24 @16x20", (1, 16, 20, 48), (3, 3, 48, 24), 1, 2, 2),
    ("dw3x3 64 @64x80", (1, 64, 80, 64), (3, 3, 64), 1, 1, 1),
    ("dw5x5 s2 96 @32x40", (1, 32, 40, 96), (5, 5, 96), 2, 2, 1),
]


def _kernel_fn(backend, x, w, stride, pad, dil):
    op = kernels.depthwise_conv2d if w.ndim == 3 else kernels.conv2d
    return lambda: op(x, w, None, stride, pad, dil, backend=backend)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=30)
    ap.add_argument("--warmup", type=int, default=5)
    ap.add_argument("--json", default=None)
    args = ap.parse_args(argv)

    rng = make_rng(0)
    rows = []
    for label, xs, ws, s, p, d in CASES:
        x = rng.standard_normal(xs, dtype=np.float32)
        w = rng.standard_normal(ws, dtype=np.float32)
        for backend in kernels.BACKENDS:
            rep = bench.LatencyReport(bench.time_callable(_kernel_fn(backend, x, w, s, p, d), args.runs, args.warmup),
                                      args.warmup, bench.host_descriptor())
            rows.append({"case": label, "backend": backend, "p50_ms": rep.p50, "p90_ms": rep.p90})

    g = tcl_tiny()
    wts = random_weights(g, seed=0)
    img = RgbImage(make_rng(1).random((480, 640, 3)).astype(np.float32))
    for backend in kernels.BACKENDS + (("auto",) if "cython" in kernels.BACKENDS else ()):
        rep = bench.time_inference(Engine(g, wts, backend=backend), img, runs=args.runs, warmup=args.warmup)
        rows.append({"case": "tcl-tiny 640x480 end-to-end", "backend": backend,
                     "p50_ms": rep.p50, "p90_ms": rep.p90})

    width = max(len(r["case"]) for r in rows)
    print(f"{'case':<{width}}  {'backend':<8} {'p50 ms':>9} {'p90 ms':>9}")
    for r in rows:
        print(f"{r['case']:<{width}}  {r['backend']:<8} {r['p50_ms']:9.3f} {r['p90_ms']:9.3f}")
    if "cython" not in kernels.BACKENDS:
        print("compiled extension not built; only the numpy path was measured", file=sys.stderr)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"host": bench.host_descriptor(), "rows": rows}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
