"""Naive loop implementations used as correctness oracles for the fast kernels.

These are deliberately written as plain nested loops with float64
accumulation. They are slow; use them on small shapes only.
"""
import numpy as np

from .shapes import conv_out_size, pair


def conv2d_naive(x, w, bias=None, stride=1, padding=0, dilation=1):
    """Cross-correlation of NHWC ``x`` with HWIO ``w`` via six nested loops."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, h, wd, cin = x.shape
    kh, kw, cin_w, cout = w.shape
    assert cin == cin_w
    sh, sw = pair(stride)
    ph, pw = pair(padding)
    dh, dw = pair(dilation)
    ho = conv_out_size(h, kh, sh, ph, dh)
    wo = conv_out_size(wd, kw, sw, pw, dw)
    out = np.zeros((n, ho, wo, cout))
    xl = x.tolist()
    wl = w.tolist()
    for b in range(n):
        for oy in range(ho):
            for ox in range(wo):
                for co in range(cout):
                    acc = 0.0 if bias is None else float(bias[co])
                    for ky in range(kh):
                        iy = oy * sh - ph + ky * dh
                        if iy < 0 or iy >= h:
                            continue
                        for kx in range(kw):
                            ix = ox * sw - pw + kx * dw
                            if ix < 0 or ix >= wd:
                                continue
                            px = xl[b][iy][ix]
                            wk = wl[ky][kx]
                            for ci in range(cin):
                                acc += px[ci] * wk[ci][co]
                    out[b, oy, ox, co] = acc
    return out


def depthwise_conv_naive(x, w, bias=None, stride=1, padding=0, dilation=1):
    """Per-channel convolution: ``w`` has shape (KH, KW, C)."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, h, wd, c = x.shape
    kh, kw, _ = w.shape
    sh, sw = pair(stride)
    ph, pw = pair(padding)
    dh, dw = pair(dilation)
    ho = conv_out_size(h, kh, sh, ph, dh)
    wo = conv_out_size(wd, kw, sw, pw, dw)
    out = np.zeros((n, ho, wo, c))
    for b in range(n):
        for oy in range(ho):
            for ox in range(wo):
                for ch in range(c):
                    acc = 0.0 if bias is None else float(bias[ch])
                    for ky in range(kh):
                        for kx in range(kw):
                            iy = oy * sh - ph + ky * dh
                            ix = ox * sw - pw + kx * dw
                            if 0 <= iy < h and 0 <= ix < wd:
                                acc += x[b, iy, ix, ch] * w[ky, kx, ch]
                    out[b, oy, ox, ch] = acc
    return out
