"""Pure-numpy implementations of the hot inner loops.

Fallback path used when numba is unavailable or when
``LANG2COLOR_BACKEND=numpy`` is set. Signatures mirror
``numba_kernels`` exactly.
"""

import numpy as np


def im2col(xpad, k, stride, dilation, out_h, out_w):
    """Gather k x k patches of a padded NCHW tensor into column form.

    Returns an array of shape (N, C*k*k, out_h*out_w) with
    cols[n, c*k*k + ki*k + kj, oh*out_w + ow] =
    xpad[n, c, oh*stride + ki*dilation, ow*stride + kj*dilation].
    """
    n, c, _, _ = xpad.shape
    cols = np.empty((n, c, k, k, out_h, out_w), dtype=xpad.dtype)
    for ki in range(k):
        for kj in range(k):
            r0 = ki * dilation
            c0 = kj * dilation
            cols[:, :, ki, kj] = xpad[
                :, :,
                r0 : r0 + stride * (out_h - 1) + 1 : stride,
                c0 : c0 + stride * (out_w - 1) + 1 : stride,
            ]
    return cols.reshape(n, c * k * k, out_h * out_w)


def col2im(cols, n, c, hp, wp, k, stride, dilation, out_h, out_w):
    """Scatter-add columns back onto the padded input; adjoint of im2col."""
    cols6 = cols.reshape(n, c, k, k, out_h, out_w)
    dx = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    for ki in range(k):
        for kj in range(k):
            r0 = ki * dilation
            c0 = kj * dilation
            dx[
                :, :,
                r0 : r0 + stride * (out_h - 1) + 1 : stride,
                c0 : c0 + stride * (out_w - 1) + 1 : stride,
            ] += cols6[:, :, ki, kj]
    return dx


def bilinear_resize(img, out_h, out_w):
    """Resize a (C, H, W) array with align-corners bilinear interpolation."""
    _, h, w = img.shape
    ys = np.linspace(0.0, h - 1.0, out_h)
    xs = np.linspace(0.0, w - 1.0, out_w)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[None, :, None]
    wx = (xs - x0)[None, None, :]

    v00 = img[:, y0][:, :, x0]
    v01 = img[:, y0][:, :, x1]
    v10 = img[:, y1][:, :, x0]
    v11 = img[:, y1][:, :, x1]
    out = (
        v00 * (1.0 - wy) * (1.0 - wx)
        + v01 * (1.0 - wy) * wx
        + v10 * wy * (1.0 - wx)
        + v11 * wy * wx
    )
    return out.astype(img.dtype, copy=False)
