"""NumPy fallback for the 1-d convolution kernels.

Call signatures match the compiled extension ``hgvoc._kernels``; the
dispatcher in ``hgvoc.backend`` selects whichever is active.  All inputs
are C-contiguous float32 or float64 arrays that the caller has already
zero-padded, so every function here computes a "valid" convolution.

Convolutions lower to matrix multiplies over gathered input columns.
The time axis is processed in tiles so the gather buffer stays a few
megabytes regardless of signal length; one long signal would otherwise
thrash the cache hierarchy badly enough to turn linear work superlinear.
Results are deterministic for a fixed BLAS thread count.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided

_TILE_ELEMS = 1 << 20  # gather buffer budget in elements (4 MB at float32)


def _col_tile(xs, kernel, dilation, stride, t0, tl, buf):
    s0, s1 = xs.strides
    view = as_strided(xs[:, t0 * stride:], (xs.shape[0], kernel, tl),
                      (s0, s1 * dilation, s1 * stride))
    np.copyto(buf[:, :, :tl], view)
    return buf[:, :, :tl].reshape(xs.shape[0] * kernel, tl)


def _tile_len(c_g, kernel, t_out):
    return max(64, min(t_out, _TILE_ELEMS // max(1, c_g * kernel)))


def conv1d_forward(xpad, w, dilation, stride, groups):
    c_out, c_g, k = w.shape
    t_pad = xpad.shape[1]
    t_out = (t_pad - (k - 1) * dilation - 1) // stride + 1
    o_g = c_out // groups
    if k == 1 and groups == 1:
        x = xpad if stride == 1 else np.ascontiguousarray(xpad[:, ::stride])
        return w.reshape(c_out, c_g) @ x
    y = np.empty((c_out, t_out), dtype=xpad.dtype)
    tile = _tile_len(c_g, k, t_out)
    buf = np.empty((c_g, k, tile), dtype=xpad.dtype)
    for g in range(groups):
        wg = w[g * o_g:(g + 1) * o_g].reshape(o_g, c_g * k)
        xs = xpad[g * c_g:(g + 1) * c_g]
        for t0 in range(0, t_out, tile):
            tl = min(tile, t_out - t0)
            col = _col_tile(xs, k, dilation, stride, t0, tl, buf)
            np.matmul(wg, col, out=y[g * o_g:(g + 1) * o_g, t0:t0 + tl])
    return y


def conv1d_backward_input(gy, w, dilation, stride, groups, t_pad):
    c_out, c_g, k = w.shape
    t_out = gy.shape[1]
    o_g = c_out // groups
    if k == 1 and groups == 1 and stride == 1:
        return w.reshape(c_out, c_g).T @ gy
    gx = np.zeros((c_g * groups, t_pad), dtype=gy.dtype)
    tile = _tile_len(c_g, k, t_out)
    for g in range(groups):
        wt = w[g * o_g:(g + 1) * o_g].reshape(o_g, c_g * k).T
        dst = gx[g * c_g:(g + 1) * c_g]
        for t0 in range(0, t_out, tile):
            tl = min(tile, t_out - t0)
            gcol = (wt @ gy[g * o_g:(g + 1) * o_g, t0:t0 + tl]).reshape(c_g, k, tl)
            for kk in range(k):
                start = kk * dilation + t0 * stride
                dst[:, start:start + tl * stride:stride] += gcol[:, kk, :]
    return gx


def conv1d_backward_weight(gy, xpad, dilation, stride, groups, k):
    c_in, _ = xpad.shape
    c_out, t_out = gy.shape
    c_g = c_in // groups
    o_g = c_out // groups
    if k == 1 and groups == 1 and stride == 1:
        return (gy @ xpad.T).reshape(c_out, c_in, 1)
    gw = np.zeros((c_out, c_g * k), dtype=gy.dtype)
    tile = _tile_len(c_g, k, t_out)
    buf = np.empty((c_g, k, tile), dtype=xpad.dtype)
    for g in range(groups):
        xs = xpad[g * c_g:(g + 1) * c_g]
        acc = gw[g * o_g:(g + 1) * o_g]
        for t0 in range(0, t_out, tile):
            tl = min(tile, t_out - t0)
            col = _col_tile(xs, k, dilation, stride, t0, tl, buf)
            acc += gy[g * o_g:(g + 1) * o_g, t0:t0 + tl] @ col.T
    return gw.reshape(c_out, c_g, k)


def fnv1a64(data):
    """64-bit FNV-1a over a bytes-like object (pure Python loop)."""
    h = 0xcbf29ce484222325
    for b in bytes(data):
        h = ((h ^ b) * 0x100000001b3) & 0xFFFFFFFFFFFFFFFF
    return h
