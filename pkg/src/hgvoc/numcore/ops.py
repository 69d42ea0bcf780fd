"""Differentiable operations recorded on a Graph tape.

Every op takes the graph as its first argument (pass ``None`` for pure
inference, which skips all tape bookkeeping), computes the forward result
eagerly in the dtype of its inputs, and registers a backward closure when
any input needs a gradient.

Layout conventions follow the model contracts: convolution tensors are
``[channels, time]``, frame/sample sequences are ``[time, channels]``.
"""

import numpy as np

from .. import backend
from .engine import Tensor

_LN10 = float(np.log(10.0))


def _track(g, out, inputs, bwd):
    if g is not None and any(t.needs_grad for t in inputs):
        out.needs_grad = True
        g.record(bwd)
    return out


def _unbroadcast(grad, shape):
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------- arithmetic

def add(g, a, b):
    out = Tensor(a.data + b.data)

    def bwd():
        if out.grad is None:
            return
        if a.needs_grad:
            a.accumulate(_unbroadcast(out.grad, a.shape))
        if b.needs_grad:
            b.accumulate(_unbroadcast(out.grad, b.shape))
    return _track(g, out, (a, b), bwd)


def sub(g, a, b):
    out = Tensor(a.data - b.data)

    def bwd():
        if out.grad is None:
            return
        if a.needs_grad:
            a.accumulate(_unbroadcast(out.grad, a.shape))
        if b.needs_grad:
            b.accumulate(_unbroadcast(-out.grad, b.shape))
    return _track(g, out, (a, b), bwd)


def mul(g, a, b):
    out = Tensor(a.data * b.data)

    def bwd():
        if out.grad is None:
            return
        if a.needs_grad:
            a.accumulate(_unbroadcast(out.grad * b.data, a.shape))
        if b.needs_grad:
            b.accumulate(_unbroadcast(out.grad * a.data, b.shape))
    return _track(g, out, (a, b), bwd)


def div(g, a, b):
    y = a.data / b.data
    out = Tensor(y)

    def bwd():
        if out.grad is None:
            return
        if a.needs_grad:
            a.accumulate(_unbroadcast(out.grad / b.data, a.shape))
        if b.needs_grad:
            b.accumulate(_unbroadcast(-out.grad * y / b.data, b.shape))
    return _track(g, out, (a, b), bwd)


def scale(g, x, s):
    s = float(s)
    out = Tensor(x.data * np.asarray(s, dtype=x.dtype))

    def bwd():
        if out.grad is not None and x.needs_grad:
            x.accumulate(out.grad * np.asarray(s, dtype=x.dtype))
    return _track(g, out, (x,), bwd)


def square(g, x):
    out = Tensor(x.data * x.data)

    def bwd():
        if out.grad is not None and x.needs_grad:
            x.accumulate(2.0 * x.data * out.grad)
    return _track(g, out, (x,), bwd)


def abs_(g, x):
    out = Tensor(np.abs(x.data))

    def bwd():
        if out.grad is not None and x.needs_grad:
            x.accumulate(np.sign(x.data) * out.grad)
    return _track(g, out, (x,), bwd)


def log(g, x):
    out = Tensor(np.log(x.data))

    def bwd():
        if out.grad is not None and x.needs_grad:
            x.accumulate(out.grad / x.data)
    return _track(g, out, (x,), bwd)


def clamp_min(g, x, floor):
    y = np.maximum(x.data, np.asarray(floor, dtype=x.dtype))
    out = Tensor(y)

    def bwd():
        if out.grad is not None and x.needs_grad:
            x.accumulate(np.where(x.data >= floor, out.grad, 0))
    return _track(g, out, (x,), bwd)


# ---------------------------------------------------------------- reductions

def sum_all(g, x):
    out = Tensor(np.asarray(x.data.sum(), dtype=x.dtype))

    def bwd():
        if out.grad is not None and x.needs_grad:
            x.accumulate(np.broadcast_to(out.grad, x.shape))
    return _track(g, out, (x,), bwd)


def mean_all(g, x):
    n = x.size
    out = Tensor(np.asarray(x.data.mean(), dtype=x.dtype))

    def bwd():
        if out.grad is not None and x.needs_grad:
            x.accumulate(np.broadcast_to(out.grad / n, x.shape))
    return _track(g, out, (x,), bwd)


def sum_axis(g, x, axis, keepdims=False):
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims))

    def bwd():
        if out.grad is None or not x.needs_grad:
            return
        go = out.grad if keepdims else np.expand_dims(out.grad, axis)
        x.accumulate(np.broadcast_to(go, x.shape))
    return _track(g, out, (x,), bwd)


# ------------------------------------------------------------- shape movers

def transpose(g, x):
    out = Tensor(np.ascontiguousarray(x.data.T))

    def bwd():
        if out.grad is not None and x.needs_grad:
            x.accumulate(out.grad.T)
    return _track(g, out, (x,), bwd)


def reshape(g, x, shape):
    out = Tensor(x.data.reshape(shape))

    def bwd():
        if out.grad is not None and x.needs_grad:
            x.accumulate(out.grad.reshape(x.shape))
    return _track(g, out, (x,), bwd)


def concat(g, parts, axis):
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    sizes = [p.shape[axis] for p in parts]

    def bwd():
        if out.grad is None:
            return
        offset = 0
        for p, s in zip(parts, sizes):
            if p.needs_grad:
                sl = [slice(None)] * out.grad.ndim
                sl[axis] = slice(offset, offset + s)
                p.accumulate(out.grad[tuple(sl)])
            offset += s
    return _track(g, out, tuple(parts), bwd)


def slice_axis(g, x, axis, start, stop):
    sl = [slice(None)] * x.data.ndim
    sl[axis] = slice(start, stop)
    sl = tuple(sl)
    out = Tensor(np.ascontiguousarray(x.data[sl]))

    def bwd():
        if out.grad is None or not x.needs_grad:
            return
        gx = np.zeros_like(x.data)
        gx[sl] = out.grad
        x.accumulate(gx)
    return _track(g, out, (x,), bwd)


# ------------------------------------------------------------- neural ops

def conv1d(g, x, w, b=None, dilation=1, padding="same_zero", stride=1, groups=1):
    """1-d convolution over [C, T] input with [C_out, C_in/groups, K] weight.

    ``same_zero`` zero-pads symmetrically (odd K only) and ``causal`` pads
    the full receptive span on the left; both preserve the time length at
    stride 1.
    """
    xd, wd = x.data, w.data
    if xd.ndim != 2 or wd.ndim != 3:
        raise ValueError("conv1d expects x [C,T] and w [C_out,C_in/groups,K]")
    c_out, c_gw, k = wd.shape
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    if xd.shape[0] != c_gw * groups:
        raise ValueError(
            f"input channels {xd.shape[0]} do not match weight "
            f"{c_gw} x groups {groups}")
    if c_out % groups:
        raise ValueError("output channels must divide by groups")
    if padding == "same_zero":
        if k % 2 == 0:
            raise ValueError("same_zero padding needs an odd kernel size")
        pl = pr = (k - 1) // 2 * dilation
    elif padding == "causal":
        pl, pr = (k - 1) * dilation, 0
    else:
        raise ValueError(f"unknown padding mode {padding!r}")
    rdt = np.result_type(xd, wd) if b is None else np.result_type(xd, wd, b.data)
    wd = np.ascontiguousarray(wd, dtype=rdt)
    xpad = np.pad(xd.astype(rdt, copy=False), ((0, 0), (pl, pr)))
    y = backend.conv1d_forward(xpad, wd, dilation, stride, groups)
    if b is not None:
        y += b.data[:, None]
    out = Tensor(y)
    t_pad = xpad.shape[1]
    inputs = (x, w) if b is None else (x, w, b)

    def bwd():
        go = out.grad
        if go is None:
            return
        go = np.ascontiguousarray(go, dtype=rdt)
        if b is not None and b.needs_grad:
            b.accumulate(go.sum(axis=1))
        if w.needs_grad:
            w.accumulate(backend.conv1d_backward_weight(
                go, xpad, dilation, stride, groups, k))
        if x.needs_grad:
            gxp = backend.conv1d_backward_input(
                go, wd, dilation, stride, groups, t_pad)
            x.accumulate(gxp[:, pl:t_pad - pr] if pr else gxp[:, pl:])
    return _track(g, out, inputs, bwd)


def linear(g, x, w, b):
    """Per-timestep affine map: [T, C_in] x [C_out, C_in] + [C_out]."""
    if x.data.shape[-1] != w.data.shape[1]:
        raise ValueError(
            f"linear input width {x.data.shape[-1]} != weight width {w.data.shape[1]}")
    out = Tensor(x.data @ w.data.T + b.data)

    def bwd():
        go = out.grad
        if go is None:
            return
        if x.needs_grad:
            x.accumulate(go @ w.data)
        if w.needs_grad:
            w.accumulate(go.T @ x.data)
        if b.needs_grad:
            b.accumulate(go.sum(axis=0))
    return _track(g, out, (x, w, b), bwd)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def activation(g, x, kind):
    xd = x.data
    if kind == "tanh":
        y = np.tanh(xd)
        dydx = lambda: 1.0 - y * y
    elif kind == "leaky_relu_0.2":
        y = np.where(xd >= 0, xd, np.asarray(0.2, xd.dtype) * xd)
        dydx = lambda: np.where(xd >= 0, np.asarray(1.0, xd.dtype),
                                np.asarray(0.2, xd.dtype))
    elif kind == "sigmoid":
        y = _sigmoid(xd)
        dydx = lambda: y * (1.0 - y)
    elif kind == "modified_sigmoid":
        # 2 * sigmoid(x)^ln(10) + 1e-7, range (1e-7, 2 + 1e-7)
        s = _sigmoid(xd)
        p = s ** _LN10
        y = 2.0 * p + np.asarray(1e-7, xd.dtype)
        dydx = lambda: 2.0 * _LN10 * p * (1.0 - s)
    else:
        raise ValueError(f"unknown activation {kind!r}")
    out = Tensor(y.astype(xd.dtype, copy=False))

    def bwd():
        if out.grad is not None and x.needs_grad:
            x.accumulate(dydx() * out.grad)
    return _track(g, out, (x,), bwd)


def tanh(g, x):
    return activation(g, x, "tanh")


def leaky_relu(g, x):
    return activation(g, x, "leaky_relu_0.2")


def modified_sigmoid(g, x):
    return activation(g, x, "modified_sigmoid")


# --------------------------------------------------------------- resampling

def upsample_linear(g, x, factor):
    """[That, C] frames -> [That*factor, C] samples.

    Sample ``t*factor`` equals frame ``t`` exactly, values in between
    interpolate linearly, and the stretch after the last frame holds its
    value.
    """
    if factor < 1:
        raise ValueError("factor must be >= 1")
    xd = x.data
    t_hat, c = xd.shape
    frac = (np.arange(factor, dtype=xd.dtype) / factor)[None, :, None]
    x_next = np.concatenate([xd[1:], xd[-1:]], axis=0)
    y = (1.0 - frac) * xd[:, None, :] + frac * x_next[:, None, :]
    out = Tensor(np.ascontiguousarray(y.reshape(t_hat * factor, c)))

    def bwd():
        if out.grad is None or not x.needs_grad:
            return
        go = out.grad.reshape(t_hat, factor, c)
        lo = np.einsum("tfc,f->tc", go, (1.0 - frac)[0, :, 0])
        hi = np.einsum("tfc,f->tc", go, frac[0, :, 0])
        gx = lo
        gx[1:] += hi[:-1]
        gx[-1] += hi[-1]
        x.accumulate(gx)
    return _track(g, out, (x,), bwd)


def upsample_nearest(g, x, factor):
    """[That, C] frames -> [That*factor, C], each frame repeated."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    t_hat, c = x.data.shape
    out = Tensor(np.repeat(x.data, factor, axis=0))

    def bwd():
        if out.grad is not None and x.needs_grad:
            x.accumulate(out.grad.reshape(t_hat, factor, c).sum(axis=1))
    return _track(g, out, (x,), bwd)


def cumsum_time(g, x):
    """Running sum down the time axis (axis 0)."""
    out = Tensor(np.cumsum(x.data, axis=0))

    def bwd():
        if out.grad is not None and x.needs_grad:
            x.accumulate(np.flip(np.cumsum(np.flip(out.grad, 0), axis=0), 0))
    return _track(g, out, (x,), bwd)


# ------------------------------------------------------------------ spectra

def hann_window(n, dtype=np.float32):
    # periodic form, matched between the op and its test oracles
    i = np.arange(n, dtype=np.float64)
    return (0.5 - 0.5 * np.cos(2.0 * np.pi * i / n)).astype(dtype)


def frame_count(n_samples, hop):
    """Frames of a center-padded analysis: ceil(T/hop) + 1."""
    return int(np.ceil(n_samples / hop)) + 1


def stft_magnitude(g, x, fft_size, hop=None):
    """Magnitude STFT of a 1-d signal: [frames, fft_size/2 + 1].

    Center-padded (reflect) framing with a periodic Hann window of the
    FFT length; hop defaults to fft_size/4 (75% overlap).  Gradients flow
    through |z| = sqrt(re^2 + im^2 + 1e-12).
    """
    xd = x.data
    if xd.ndim != 1:
        raise ValueError("stft_magnitude expects a 1-d signal")
    if fft_size < 4 or fft_size & (fft_size - 1):
        raise ValueError("fft_size must be a power of two")
    hop = fft_size // 4 if hop is None else hop
    t = xd.shape[0]
    nf = frame_count(t, hop)
    pl = fft_size // 2
    pr = (nf - 1) * hop + fft_size - t - pl
    if pl >= t or pr >= t:
        raise ValueError(
            f"signal of {t} samples is shorter than one {fft_size}-point window "
            "after centering")
    xp = np.pad(xd, (pl, pr), mode="reflect")
    starts = np.arange(nf) * hop
    frames = xp[starts[:, None] + np.arange(fft_size)[None, :]]
    win = hann_window(fft_size, xd.dtype)
    z = np.fft.rfft(frames * win, axis=1)
    re, im = np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag)
    power = re * re + im * im
    mag = np.sqrt(power)
    out = Tensor(mag)

    def bwd():
        go = out.grad
        if go is None or not x.needs_grad:
            return
        # guarded denominator avoids the |z| derivative singularity at 0
        s = go / np.sqrt(power + np.asarray(1e-12, xd.dtype))
        spec = (re * s) + 1j * (im * s)
        spec[:, 1:-1] *= 0.5
        gframes = np.fft.irfft(spec, n=fft_size, axis=1) * fft_size * win
        gxp = np.zeros_like(xp)
        for f in range(nf):
            gxp[starts[f]:starts[f] + fft_size] += gframes[f]
        src = np.pad(np.arange(t), (pl, pr), mode="reflect")
        gx = np.zeros_like(xd)
        np.add.at(gx, src, gxp)
        x.accumulate(gx)
    return _track(g, out, (x,), bwd)


# ------------------------------------------------------------------ filters

def fir_causal(g, x, h):
    """True causal convolution y[t] = sum_tau h[tau] * x[t-tau], length-preserving."""
    xd, hd = x.data, h.data
    if xd.ndim != 1 or hd.ndim != 1:
        raise ValueError("fir_causal expects 1-d signal and taps")
    k = hd.shape[0]
    rdt = np.result_type(xd, hd)
    wrev = np.ascontiguousarray(hd[::-1], dtype=rdt).reshape(1, 1, k)
    xpad = np.pad(xd.astype(rdt, copy=False), (k - 1, 0)).reshape(1, -1)
    y = backend.conv1d_forward(xpad, wrev, 1, 1, 1)[0]
    out = Tensor(y)
    t_pad = xpad.shape[1]

    def bwd():
        go = out.grad
        if go is None:
            return
        go2 = np.ascontiguousarray(go, dtype=rdt).reshape(1, -1)
        if h.needs_grad:
            gw = backend.conv1d_backward_weight(go2, xpad, 1, 1, 1, k)
            h.accumulate(gw[0, 0, ::-1])
        if x.needs_grad:
            gxp = backend.conv1d_backward_input(go2, wrev, 1, 1, 1, t_pad)
            x.accumulate(gxp[0, k - 1:])
    return _track(g, out, (x, h), bwd)


def avg_pool1d(g, x, kernel=4, stride=2, pad=1):
    """Mean pooling over [C, T], zero padded; plain strided-window average."""
    xd = x.data
    c, t = xd.shape
    xp = np.pad(xd, ((0, 0), (pad, pad)))
    t_out = (t + 2 * pad - kernel) // stride + 1
    y = np.zeros((c, t_out), dtype=xd.dtype)
    for kk in range(kernel):
        y += xp[:, kk:kk + t_out * stride:stride]
    y /= kernel
    out = Tensor(y)

    def bwd():
        go = out.grad
        if go is None or not x.needs_grad:
            return
        gxp = np.zeros_like(xp)
        gk = go / kernel
        for kk in range(kernel):
            gxp[:, kk:kk + t_out * stride:stride] += gk
        x.accumulate(gxp[:, pad:pad + t])
    return _track(g, out, (x,), bwd)
