"""Convolution kernels with a backend chosen at import time.

When the compiled extension (``_ckernels``) is built, the default is ``auto``:
dense convolutions go to the numpy gather + BLAS matmul path and depthwise ones
to the compiled loop, which is where each measured faster (see
benchmarks/bench_kernels.py). Without the extension everything uses numpy.
Set ``DEPTHBENCH_KERNELS`` to ``numpy``, ``cython`` or ``auto`` to force one.
"""
import os

import numpy as np

from ..errors import ShapeError
from . import _kernels_np
from .shapes import conv_out_size, pair

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = ("numpy",) + (("cython",) if _ckernels is not None else ())
_AUTO = {"conv2d": "numpy", "depthwise": "cython"}


def _default_backend():
    forced = os.environ.get("DEPTHBENCH_KERNELS")
    if forced:
        if forced not in BACKENDS + ("auto",):
            raise ImportError(f"DEPTHBENCH_KERNELS={forced!r} is not available (have {BACKENDS})")
        return forced if forced != "auto" or _ckernels is not None else "numpy"
    return "auto" if _ckernels is not None else "numpy"


DEFAULT_BACKEND = _default_backend()


def _resolve(backend, op):
    backend = backend or DEFAULT_BACKEND
    if backend == "auto" and _ckernels is not None:
        return _AUTO[op]
    if backend not in BACKENDS:
        raise ValueError(f"unknown or unavailable kernel backend {backend!r}")
    return backend


def _check(x, w, bias, cout, stride, dilation):
    sh, sw = pair(stride)
    dh, dw = pair(dilation)
    if min(sh, sw, dh, dw) < 1:
        raise ShapeError("stride and dilation must be >= 1")
    if bias is not None and np.shape(bias) != (cout,):
        raise ShapeError(f"bias shape {np.shape(bias)} != ({cout},)")


def conv2d(x, w, bias=None, stride=1, padding=0, dilation=1, backend=None):
    """Zero-padded cross-correlation. ``x``: NHWC, ``w``: (KH, KW, Cin, Cout)."""
    x = np.ascontiguousarray(x, dtype=np.float32)
    w = np.ascontiguousarray(w, dtype=np.float32)
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and kernel, got {x.shape}, {w.shape}")
    if x.shape[3] != w.shape[2]:
        raise ShapeError(f"input has {x.shape[3]} channels, kernel expects {w.shape[2]}")
    _check(x, w, bias, w.shape[3], stride, dilation)
    bias = None if bias is None else np.asarray(bias, dtype=np.float32)
    # Validates the output extent before dispatch.
    conv_out_size(x.shape[1], w.shape[0], pair(stride)[0], pair(padding)[0], pair(dilation)[0])
    conv_out_size(x.shape[2], w.shape[1], pair(stride)[1], pair(padding)[1], pair(dilation)[1])
    if _resolve(backend, "conv2d") == "cython":
        return _ckernels.conv2d(x, w, bias, *pair(stride), *pair(padding), *pair(dilation))
    return _kernels_np.conv2d(x, w, bias, stride, padding, dilation)


def depthwise_conv2d(x, w, bias=None, stride=1, padding=0, dilation=1, backend=None):
    """Per-channel convolution. ``w``: (KH, KW, C)."""
    x = np.ascontiguousarray(x, dtype=np.float32)
    w = np.ascontiguousarray(w, dtype=np.float32)
    if x.ndim != 4 or w.ndim != 3:
        raise ShapeError(f"depthwise expects 4-D input and 3-D kernel, got {x.shape}, {w.shape}")
    if x.shape[3] != w.shape[2]:
        raise ShapeError(f"input has {x.shape[3]} channels, kernel has {w.shape[2]}")
    _check(x, w, bias, w.shape[2], stride, dilation)
    bias = None if bias is None else np.asarray(bias, dtype=np.float32)
    conv_out_size(x.shape[1], w.shape[0], pair(stride)[0], pair(padding)[0], pair(dilation)[0])
    conv_out_size(x.shape[2], w.shape[1], pair(stride)[1], pair(padding)[1], pair(dilation)[1])
    if _resolve(backend, "depthwise") == "cython":
        return _ckernels.depthwise_conv2d(x, w, bias, *pair(stride), *pair(padding), *pair(dilation))
    return _kernels_np.depthwise_conv2d(x, w, bias, stride, padding, dilation)
