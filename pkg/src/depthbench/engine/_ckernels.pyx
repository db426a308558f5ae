# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled direct-convolution kernels (NHWC activations, HWIO weights)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline int _out(int size, int k, int s, int p, int d):
    return (size + 2 * p - d * (k - 1) - 1) // s + 1


def conv2d(const float[:, :, :, ::1] x, const float[:, :, :, ::1] w, bias,
           int sh, int sw, int ph, int pw, int dh, int dw):
    cdef int n = x.shape[0], h = x.shape[1], wd = x.shape[2], cin = x.shape[3]
    cdef int kh = w.shape[0], kw = w.shape[1], cout = w.shape[3]
    cdef int ho = _out(h, kh, sh, ph, dh), wo = _out(wd, kw, sw, pw, dw)
    out_arr = np.empty((n, ho, wo, cout), dtype=np.float32)
    cdef float[:, :, :, ::1] out = out_arr
    cdef float[::1] b
    cdef bint has_bias = bias is not None
    if has_bias:
        b = np.ascontiguousarray(bias, dtype=np.float32)
    cdef int bi, oy, ox, ky, kx, iy, ix, ci, co
    cdef float xv
    with nogil:
        for bi in range(n):
            for oy in range(ho):
                for ox in range(wo):
                    for co in range(cout):
                        out[bi, oy, ox, co] = b[co] if has_bias else 0.0
                    for ky in range(kh):
                        iy = oy * sh - ph + ky * dh
                        if iy < 0 or iy >= h:
                            continue
                        for kx in range(kw):
                            ix = ox * sw - pw + kx * dw
                            if ix < 0 or ix >= wd:
                                continue
                            for ci in range(cin):
                                xv = x[bi, iy, ix, ci]
                                for co in range(cout):
                                    out[bi, oy, ox, co] += xv * w[ky, kx, ci, co]
    return out_arr


def depthwise_conv2d(const float[:, :, :, ::1] x, const float[:, :, ::1] w, bias,
                     int sh, int sw, int ph, int pw, int dh, int dw):
    cdef int n = x.shape[0], h = x.shape[1], wd = x.shape[2], c = x.shape[3]
    cdef int kh = w.shape[0], kw = w.shape[1]
    cdef int ho = _out(h, kh, sh, ph, dh), wo = _out(wd, kw, sw, pw, dw)
    out_arr = np.empty((n, ho, wo, c), dtype=np.float32)
    cdef float[:, :, :, ::1] out = out_arr
    cdef float[::1] b
    cdef bint has_bias = bias is not None
    if has_bias:
        b = np.ascontiguousarray(bias, dtype=np.float32)
    cdef int bi, oy, ox, ky, kx, iy, ix, ch
    with nogil:
        for bi in range(n):
            for oy in range(ho):
                for ox in range(wo):
                    for ch in range(c):
                        out[bi, oy, ox, ch] = b[ch] if has_bias else 0.0
                    for ky in range(kh):
                        iy = oy * sh - ph + ky * dh
                        if iy < 0 or iy >= h:
                            continue
                        for kx in range(kw):
                            ix = ox * sw - pw + kx * dw
                            if ix < 0 or ix >= wd:
                                continue
                            for ch in range(c):
                                out[bi, oy, ox, ch] += x[bi, iy, ix, ch] * w[ky, kx, ch]
    return out_arr
