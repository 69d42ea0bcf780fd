"""Fundamental frequency estimation and voicing utilities.

The tracker is an autocorrelation-difference estimator: per frame it
computes the cumulative-mean-normalized difference function, takes the
first dip under a threshold as the period candidate, refines it with
parabolic interpolation, and reports 0 for frames with no credible dip.
Frames are centered at t*hop, the same grid as the mel extractor, so
mel, F0, and voicing line up one to one.

Externally computed tracks (one value per line, text) can be substituted
via :func:`read_f0_file`.
"""

import numpy as np

from ..numcore.ops import frame_count

_ENERGY_GATE = 1e-4  # frame RMS below this is treated as silence


def derive_uv(f0_hz):
    """Voicing flags: 1 where f0 > 0, else 0."""
    f0 = np.asarray(f0_hz, dtype=np.float32)
    if np.any(f0 < 0):
        raise ValueError("negative F0 values are invalid")
    return (f0 > 0).astype(np.uint8)


def interpolate_unvoiced(f0_hz, fallback_hz=100.0):
    """Fill zero runs by linear interpolation between voiced neighbours.

    Leading and trailing gaps hold the nearest voiced value; a fully
    unvoiced track becomes a constant fallback so downstream math stays
    positive (the voicing gate silences the oscillator there anyway).
    """
    f0 = np.asarray(f0_hz, dtype=np.float64)
    voiced = np.nonzero(f0 > 0)[0]
    if voiced.size == 0:
        return np.full(f0.shape, fallback_hz, dtype=np.float32)
    out = np.interp(np.arange(f0.shape[0]), voiced, f0[voiced])
    return out.astype(np.float32)


def read_f0_file(path, expected_frames=None):
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                values.append(float(line))
    f0 = np.asarray(values, dtype=np.float32)
    if expected_frames is not None and f0.shape[0] != expected_frames:
        raise ValueError(
            f"{path}: has {f0.shape[0]} frames, expected {expected_frames}")
    if np.any(f0 < 0):
        raise ValueError(f"{path}: negative F0 values")
    return f0


def estimate_f0(buf, f0_min=50.0, f0_max=600.0, hop=275, frame_length=1102,
                threshold=0.1):
    """Per-frame F0 in Hz; exactly 0 on unvoiced frames."""
    sr = buf.sample_rate
    x = np.asarray(buf.samples, dtype=np.float64)
    t = x.shape[0]
    nf = frame_count(t, hop)

    tau_min = max(2, int(sr / f0_max))
    tau_max = int(np.ceil(sr / f0_min))
    w = frame_length
    span = w + tau_max

    centers = np.arange(nf) * hop
    starts = centers - span // 2
    pad_l = max(0, -starts.min())
    pad_r = max(0, starts.max() + span - t)
    xp = np.pad(x, (pad_l, pad_r))
    frames = xp[(starts + pad_l)[:, None] + np.arange(span)[None, :]]

    head = frames[:, :w]
    rms = np.sqrt((head ** 2).mean(axis=1))

    # r[f, tau] = sum_n head[f, n] * frames[f, n + tau] via FFT correlation
    nfft = 1 << int(np.ceil(np.log2(span + w)))
    spec_head = np.fft.rfft(head, n=nfft, axis=1)
    spec_all = np.fft.rfft(frames, n=nfft, axis=1)
    corr = np.fft.irfft(np.conj(spec_head) * spec_all, n=nfft, axis=1)
    corr = corr[:, :tau_max + 1]

    sq = frames ** 2
    csum = np.cumsum(sq, axis=1)
    e0 = corr[:, :1]
    tails = csum[:, w - 1 + np.arange(tau_max + 1)]
    heads_excl = np.concatenate(
        [np.zeros((nf, 1)), csum[:, np.arange(tau_max)]], axis=1)
    e_tau = tails - heads_excl  # energy of frames[:, tau : tau + w]

    diff = np.maximum(e0 + e_tau - 2.0 * corr, 0.0)
    denom = np.cumsum(diff[:, 1:], axis=1)
    taus = np.arange(1, tau_max + 1, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        cmndf = np.where(denom > 0, diff[:, 1:] * taus / denom, 1.0)
    cmndf = np.concatenate([np.ones((nf, 1)), cmndf], axis=1)

    f0 = np.zeros(nf, dtype=np.float32)
    for f in range(nf):
        if rms[f] < _ENERGY_GATE:
            continue
        row = cmndf[f]
        tau = _first_dip(row, tau_min, tau_max, threshold)
        if tau == 0:
            continue
        tau_ref = _parabolic(row, tau)
        hz = sr / tau_ref
        f0[f] = min(max(hz, f0_min), f0_max)
    return f0


def _first_dip(row, tau_min, tau_max, threshold):
    tau = tau_min
    while tau <= tau_max:
        if row[tau] < threshold:
            while tau + 1 <= tau_max and row[tau + 1] < row[tau]:
                tau += 1
            return tau
        tau += 1
    return 0


def _parabolic(row, tau):
    if tau <= 0 or tau + 1 >= row.shape[0]:
        return float(tau)
    a, b, c = row[tau - 1], row[tau], row[tau + 1]
    denom = a - 2.0 * b + c
    if abs(denom) < 1e-12:
        return float(tau)
    shift = 0.5 * (a - c) / denom
    return float(tau) + float(np.clip(shift, -1.0, 1.0))
