"""Pure numpy kernels: the fallback when the compiled extension is unavailable."""
import numpy as np

from .shapes import conv_out_size, pair


def _taps(xp, kh, kw, ho, wo, sh, sw, dh, dw):
    for ky in range(kh):
        for kx in range(kw):
            y0, x0 = ky * dh, kx * dw
            yield ky, kx, xp[:, y0:y0 + sh * (ho - 1) + 1:sh, x0:x0 + sw * (wo - 1) + 1:sw, :]


def _pad(x, ph, pw):
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))


def conv2d(x, w, bias, stride, padding, dilation):
    """Patch-gather (im2col) followed by one matrix product."""
    n, h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    sh, sw = pair(stride)
    ph, pw = pair(padding)
    dh, dw = pair(dilation)
    ho = conv_out_size(h, kh, sh, ph, dh)
    wo = conv_out_size(wd, kw, sw, pw, dw)
    xp = _pad(x, ph, pw)
    if kh == 1 and kw == 1:
        cols = xp[:, :sh * (ho - 1) + 1:sh, :sw * (wo - 1) + 1:sw, :]
    else:
        cols = np.concatenate([t for _, _, t in _taps(xp, kh, kw, ho, wo, sh, sw, dh, dw)], axis=-1)
    out = cols.reshape(-1, kh * kw * cin) @ w.reshape(kh * kw * cin, cout)
    if bias is not None:
        out += bias
    return out.reshape(n, ho, wo, cout).astype(np.float32, copy=False)


def depthwise_conv2d(x, w, bias, stride, padding, dilation):
    n, h, wd, c = x.shape
    kh, kw, _ = w.shape
    sh, sw = pair(stride)
    ph, pw = pair(padding)
    dh, dw = pair(dilation)
    ho = conv_out_size(h, kh, sh, ph, dh)
    wo = conv_out_size(wd, kw, sw, pw, dw)
    xp = _pad(x, ph, pw)
    out = np.zeros((n, ho, wo, c), dtype=np.float32)
    for ky, kx, t in _taps(xp, kh, kw, ho, wo, sh, sw, dh, dw):
        out += t * w[ky, kx]
    if bias is not None:
        out += bias
    return out
