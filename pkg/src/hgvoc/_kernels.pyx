# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled 1-d convolution kernels (forward, input grad, weight grad).

Inputs are pre-padded C-contiguous arrays; everything here is a "valid"
convolution over the time axis.  Channels are processed in blocks of four
so each pass over an input row feeds four accumulator rows, and the time
loops run over raw pointers so the compiler can vectorize them.
"""

import numpy as np

ctypedef fused real:
    float
    double

DEF TILE = 4096


def conv1d_forward(real[:, ::1] xpad, real[:, :, ::1] w, int dilation,
                   int stride, int groups):
    cdef Py_ssize_t c_out = w.shape[0], c_g = w.shape[1], k = w.shape[2]
    cdef Py_ssize_t t_pad = xpad.shape[1]
    cdef Py_ssize_t t_out = (t_pad - (k - 1) * dilation - 1) // stride + 1
    cdef Py_ssize_t o_g = c_out // groups
    out = np.zeros((c_out, t_out), dtype=np.float32 if real is float else np.float64)
    cdef real[:, ::1] y = out
    cdef Py_ssize_t g, co, cb, ci, kk, t, t0, tl, xi, yo
    cdef real w0, w1, w2, w3
    cdef real *y0
    cdef real *y1
    cdef real *y2
    cdef real *y3
    cdef const real *xr
    with nogil:
        for t0 in range(0, t_out, TILE):
            tl = min(<Py_ssize_t>TILE, t_out - t0)
            for g in range(groups):
                co = 0
                while co < o_g:
                    yo = g * o_g + co
                    cb = min(<Py_ssize_t>4, o_g - co)
                    y0 = &y[yo, t0]
                    y1 = &y[yo + 1, t0] if cb > 1 else y0
                    y2 = &y[yo + 2, t0] if cb > 2 else y0
                    y3 = &y[yo + 3, t0] if cb > 3 else y0
                    for ci in range(c_g):
                        xi = g * c_g + ci
                        for kk in range(k):
                            w0 = w[yo, ci, kk]
                            w1 = w[yo + 1, ci, kk] if cb > 1 else <real>0
                            w2 = w[yo + 2, ci, kk] if cb > 2 else <real>0
                            w3 = w[yo + 3, ci, kk] if cb > 3 else <real>0
                            xr = &xpad[xi, kk * dilation + t0 * stride]
                            if cb == 4 and stride == 1:
                                for t in range(tl):
                                    y0[t] += w0 * xr[t]
                                    y1[t] += w1 * xr[t]
                                    y2[t] += w2 * xr[t]
                                    y3[t] += w3 * xr[t]
                            elif stride == 1:
                                for t in range(tl):
                                    y0[t] += w0 * xr[t]
                                if cb > 1:
                                    for t in range(tl):
                                        y1[t] += w1 * xr[t]
                                if cb > 2:
                                    for t in range(tl):
                                        y2[t] += w2 * xr[t]
                            else:
                                for t in range(tl):
                                    y0[t] += w0 * xr[t * stride]
                                if cb > 1:
                                    for t in range(tl):
                                        y1[t] += w1 * xr[t * stride]
                                if cb > 2:
                                    for t in range(tl):
                                        y2[t] += w2 * xr[t * stride]
                                if cb > 3:
                                    for t in range(tl):
                                        y3[t] += w3 * xr[t * stride]
                    co += cb
    return out


def conv1d_backward_input(real[:, ::1] gy, real[:, :, ::1] w, int dilation,
                          int stride, int groups, Py_ssize_t t_pad):
    cdef Py_ssize_t c_out = w.shape[0], c_g = w.shape[1], k = w.shape[2]
    cdef Py_ssize_t t_out = gy.shape[1]
    out = np.zeros((c_g * groups, t_pad), dtype=np.float32 if real is float else np.float64)
    cdef real[:, ::1] gx = out
    cdef Py_ssize_t o_g = c_out // groups
    cdef Py_ssize_t g, co, cb, ci, kk, t, t0, tl, xi, yo
    cdef real w0, w1, w2, w3
    cdef const real *g0
    cdef const real *g1
    cdef const real *g2
    cdef const real *g3
    cdef real *gxr
    with nogil:
        for t0 in range(0, t_out, TILE):
            tl = min(<Py_ssize_t>TILE, t_out - t0)
            for g in range(groups):
                for ci in range(c_g):
                    xi = g * c_g + ci
                    co = 0
                    while co < o_g:
                        yo = g * o_g + co
                        cb = min(<Py_ssize_t>4, o_g - co)
                        g0 = &gy[yo, t0]
                        g1 = &gy[yo + 1, t0] if cb > 1 else g0
                        g2 = &gy[yo + 2, t0] if cb > 2 else g0
                        g3 = &gy[yo + 3, t0] if cb > 3 else g0
                        for kk in range(k):
                            w0 = w[yo, ci, kk]
                            w1 = w[yo + 1, ci, kk] if cb > 1 else <real>0
                            w2 = w[yo + 2, ci, kk] if cb > 2 else <real>0
                            w3 = w[yo + 3, ci, kk] if cb > 3 else <real>0
                            gxr = &gx[xi, kk * dilation + t0 * stride]
                            if cb == 4 and stride == 1:
                                for t in range(tl):
                                    gxr[t] += w0 * g0[t] + w1 * g1[t] + w2 * g2[t] + w3 * g3[t]
                            elif stride == 1:
                                for t in range(tl):
                                    gxr[t] += w0 * g0[t]
                                if cb > 1:
                                    for t in range(tl):
                                        gxr[t] += w1 * g1[t]
                                if cb > 2:
                                    for t in range(tl):
                                        gxr[t] += w2 * g2[t]
                            else:
                                if cb == 4:
                                    for t in range(tl):
                                        gxr[t * stride] += w0 * g0[t] + w1 * g1[t] + w2 * g2[t] + w3 * g3[t]
                                else:
                                    for t in range(tl):
                                        gxr[t * stride] += w0 * g0[t]
                                    if cb > 1:
                                        for t in range(tl):
                                            gxr[t * stride] += w1 * g1[t]
                                    if cb > 2:
                                        for t in range(tl):
                                            gxr[t * stride] += w2 * g2[t]
                        co += cb
    return out


def conv1d_backward_weight(real[:, ::1] gy, real[:, ::1] xpad, int dilation,
                           int stride, int groups, Py_ssize_t k):
    cdef Py_ssize_t c_in = xpad.shape[0]
    cdef Py_ssize_t c_out = gy.shape[0], t_out = gy.shape[1]
    cdef Py_ssize_t c_g = c_in // groups
    cdef Py_ssize_t o_g = c_out // groups
    out = np.zeros((c_out, c_g, k), dtype=np.float32 if real is float else np.float64)
    cdef real[:, :, ::1] gw = out
    cdef Py_ssize_t g, co, cb, ci, kk, t, xi, yo
    cdef const real *g0
    cdef const real *g1
    cdef const real *g2
    cdef const real *g3
    cdef const real *xr
    cdef real a0, a1, a2, a3, xv
    with nogil:
        for g in range(groups):
            for ci in range(c_g):
                xi = g * c_g + ci
                for kk in range(k):
                    co = 0
                    while co < o_g:
                        yo = g * o_g + co
                        cb = min(<Py_ssize_t>4, o_g - co)
                        g0 = &gy[yo, 0]
                        g1 = &gy[yo + 1, 0] if cb > 1 else g0
                        g2 = &gy[yo + 2, 0] if cb > 2 else g0
                        g3 = &gy[yo + 3, 0] if cb > 3 else g0
                        xr = &xpad[xi, kk * dilation]
                        a0 = a1 = a2 = a3 = 0.0
                        if cb == 4 and stride == 1:
                            for t in range(t_out):
                                xv = xr[t]
                                a0 += g0[t] * xv
                                a1 += g1[t] * xv
                                a2 += g2[t] * xv
                                a3 += g3[t] * xv
                        elif stride == 1:
                            for t in range(t_out):
                                xv = xr[t]
                                a0 += g0[t] * xv
                                a1 += g1[t] * xv
                                a2 += g2[t] * xv
                        else:
                            for t in range(t_out):
                                xv = xr[t * stride]
                                a0 += g0[t] * xv
                                a1 += g1[t] * xv
                                a2 += g2[t] * xv
                                a3 += g3[t] * xv
                        gw[yo, ci, kk] = a0
                        if cb > 1:
                            gw[yo + 1, ci, kk] = a1
                        if cb > 2:
                            gw[yo + 2, ci, kk] = a2
                        if cb > 3:
                            gw[yo + 3, ci, kk] = a3
                        co += cb
    return out


def fnv1a64(const unsigned char[::1] data):
    """64-bit FNV-1a over a bytes-like object."""
    cdef unsigned long long h = 0xcbf29ce484222325ULL
    cdef unsigned long long prime = 0x100000001b3ULL
    cdef Py_ssize_t i
    with nogil:
        for i in range(data.shape[0]):
            h = (h ^ data[i]) * prime
    return h
