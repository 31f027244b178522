"""Numba-compiled implementations of the hot inner loops.

These dominate training time (patch gather/scatter for every
convolution forward and backward pass). Flat-index loops compile to
vectorized code; the pure-numpy twins live in ``numpy_kernels`` and
``benchmarks/bench_kernels.py`` compares the two.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def im2col(xpad, k, stride, dilation, out_h, out_w):
    n, c, hp, wp = xpad.shape
    cols = np.empty((n, c * k * k, out_h * out_w), dtype=xpad.dtype)
    xf = xpad.reshape(-1)
    cf = cols.reshape(-1)
    ckk = c * k * k
    p = out_h * out_w
    for b in range(n):
        for ch in range(c):
            for ki in range(k):
                for kj in range(k):
                    row = ch * k * k + ki * k + kj
                    cbase0 = (b * ckk + row) * p
                    c0 = kj * dilation
                    for oh in range(out_h):
                        ih = oh * stride + ki * dilation
                        xbase = ((b * c + ch) * hp + ih) * wp + c0
                        cbase = cbase0 + oh * out_w
                        if stride == 1:
                            for ow in range(out_w):
                                cf[cbase + ow] = xf[xbase + ow]
                        else:
                            for ow in range(out_w):
                                cf[cbase + ow] = xf[xbase + ow * stride]
    return cols


@njit(cache=True)
def col2im(cols, n, c, hp, wp, k, stride, dilation, out_h, out_w):
    dx = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    xf = dx.reshape(-1)
    cf = cols.reshape(-1)
    ckk = c * k * k
    p = out_h * out_w
    for b in range(n):
        for ch in range(c):
            for ki in range(k):
                for kj in range(k):
                    row = ch * k * k + ki * k + kj
                    cbase0 = (b * ckk + row) * p
                    c0 = kj * dilation
                    for oh in range(out_h):
                        ih = oh * stride + ki * dilation
                        xbase = ((b * c + ch) * hp + ih) * wp + c0
                        cbase = cbase0 + oh * out_w
                        if stride == 1:
                            for ow in range(out_w):
                                xf[xbase + ow] += cf[cbase + ow]
                        else:
                            for ow in range(out_w):
                                xf[xbase + ow * stride] += cf[cbase + ow]
    return dx


@njit(cache=True)
def bilinear_resize(img, out_h, out_w):
    c, h, w = img.shape
    out = np.empty((c, out_h, out_w), dtype=img.dtype)
    sy = (h - 1.0) / (out_h - 1.0) if out_h > 1 else 0.0
    sx = (w - 1.0) / (out_w - 1.0) if out_w > 1 else 0.0
    for oy in range(out_h):
        fy = oy * sy
        y0 = int(np.floor(fy))
        y1 = min(y0 + 1, h - 1)
        wy = fy - y0
        for ox in range(out_w):
            fx = ox * sx
            x0 = int(np.floor(fx))
            x1 = min(x0 + 1, w - 1)
            wx = fx - x0
            for ch in range(c):
                out[ch, oy, ox] = (
                    img[ch, y0, x0] * (1.0 - wy) * (1.0 - wx)
                    + img[ch, y0, x1] * (1.0 - wy) * wx
                    + img[ch, y1, x0] * wy * (1.0 - wx)
                    + img[ch, y1, x1] * wy * wx
                )
    return out
