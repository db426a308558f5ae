"""Elementwise, resampling and tensor-joining ops on NHWC float32 tensors."""
from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from . import kernels


def relu(x):
    return np.maximum(x, 0).astype(np.float32, copy=False)


def hard_sigmoid(x):
    return (np.clip(x + 3.0, 0.0, 6.0) / 6.0).astype(np.float32, copy=False)


def hard_swish(x):
    return (x * np.clip(x + 3.0, 0.0, 6.0) / 6.0).astype(np.float32, copy=False)


ACTIVATIONS = {"relu": relu, "hard_sigmoid": hard_sigmoid, "hard_swish": hard_swish}


def se_block(x, w_reduce, b_reduce, w_expand, b_expand, backend=None):
    """Squeeze-and-excite: pool -> 1x1 conv + relu -> 1x1 conv + hard_sigmoid -> rescale.

    ``w_reduce``: (C, Cr) and ``w_expand``: (Cr, C) matrices, or their
    (1, 1, ., .) kernel forms.
    """
    x = np.asarray(x, dtype=np.float32)
    c = x.shape[-1]
    wr = np.asarray(w_reduce, dtype=np.float32).reshape(c, -1)
    we = np.asarray(w_expand, dtype=np.float32).reshape(wr.shape[1], c)
    pooled = x.mean(axis=(1, 2), keepdims=True, dtype=np.float64).astype(np.float32)
    s = relu(kernels.conv2d(pooled, wr[None, None], b_reduce, backend=backend))
    gate = hard_sigmoid(kernels.conv2d(s, we[None, None], b_expand, backend=backend))
    return x * gate


def resize_nearest(x, scale=None, size=None):
    """Nearest-neighbour resize with floor index mapping.

    With an integer ``scale`` every source pixel becomes an s x s block; with
    ``size=(H, W)`` the source index is floor(dst * src / dst_size).
    """
    x = np.asarray(x)
    _, h, w, _ = x.shape
    if (scale is None) == (size is None):
        raise ValueError("give exactly one of scale or size")
    if scale is not None:
        s = int(scale)
        if s != scale or s < 1:
            raise ShapeError(f"nearest scale must be a positive integer, got {scale}")
        return np.repeat(np.repeat(x, s, axis=1), s, axis=2)
    oh, ow = size
    iy = (np.arange(oh) * h) // oh
    ix = (np.arange(ow) * w) // ow
    return x[:, iy][:, :, ix]


def _bilinear_axis(src: int, dst: int):
    # Half-pixel centres, no corner alignment; edges clamp.
    pos = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
    pos = np.clip(pos, 0.0, src - 1)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, src - 1)
    frac = (pos - i0).astype(np.float32)
    return i0, i1, frac


def resize_bilinear(x, size):
    x = np.asarray(x, dtype=np.float32)
    _, h, w, _ = x.shape
    oh, ow = size
    y0, y1, fy = _bilinear_axis(h, oh)
    x0, x1, fx = _bilinear_axis(w, ow)
    fy = fy[None, :, None, None]
    fx = fx[None, None, :, None]
    rows = x[:, y0] * (1 - fy) + x[:, y1] * fy
    return (rows[:, :, x0] * (1 - fx) + rows[:, :, x1] * fx).astype(np.float32, copy=False)


def concat(tensors, axis=-1):
    tensors = [np.asarray(t, dtype=np.float32) for t in tensors]
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    if len(tensors) == 1:
        return tensors[0]
    ref = list(tensors[0].shape)
    ax = axis % len(ref)
    for t in tensors[1:]:
        s = list(t.shape)
        if len(s) != len(ref) or any(a != b for i, (a, b) in enumerate(zip(s, ref)) if i != ax):
            raise ShapeError(f"cannot concat {tuple(ref)} with {tuple(s)} on axis {axis}")
    return np.concatenate(tensors, axis=axis)


def add(tensors):
    tensors = [np.asarray(t, dtype=np.float32) for t in tensors]
    if not tensors:
        raise ShapeError("add needs at least one tensor")
    out = tensors[0].copy()
    for t in tensors[1:]:
        if t.shape != out.shape:
            raise ShapeError(f"cannot add {out.shape} and {t.shape}")
        out += t
    return out
