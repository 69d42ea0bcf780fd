"""Polyphase sample-rate conversion with a Kaiser-windowed sinc."""

import math

import numpy as np

from .audio_io import AudioBuffer

_TAPS_PER_BRANCH = 64
_KAISER_BETA = 8.6


def resample(buf, target_rate):
    """Rational-ratio resampling, 64 taps per polyphase branch.

    Branches are normalized to unit DC gain and the filter delay is
    compensated, so output sample n sits at input time n*M/L.
    """
    if target_rate <= 0:
        raise ValueError("target rate must be positive")
    sr = buf.sample_rate
    if sr == target_rate:
        return AudioBuffer(buf.samples.copy(), sr)

    g = math.gcd(int(target_rate), int(sr))
    up, down = int(target_rate) // g, int(sr) // g

    total = _TAPS_PER_BRANCH * up
    center = (total - 1) / 2.0
    cutoff = min(1.0 / up, 1.0 / down)
    n = np.arange(total, dtype=np.float64)
    h = cutoff * np.sinc(cutoff * (n - center)) * np.kaiser(total, _KAISER_BETA)
    branches = h.reshape(_TAPS_PER_BRANCH, up).T  # [up, taps], branch p = h[p::up]
    branches = branches / branches.sum(axis=1, keepdims=True)

    x = buf.samples.astype(np.float64)
    n_out = int(np.ceil(x.shape[0] * up / down))
    u = np.arange(n_out, dtype=np.int64) * down + int(round(center))
    phase = (u % up).astype(np.int64)
    base = (u // up).astype(np.int64)

    pad = _TAPS_PER_BRANCH
    xp = np.pad(x, (pad, pad))
    y = np.zeros(n_out, dtype=np.float64)
    for t in range(_TAPS_PER_BRANCH):
        y += branches[phase, t] * xp[base - t + pad]
    return AudioBuffer(np.clip(y, -1.0, 1.0).astype(np.float32), target_rate)
