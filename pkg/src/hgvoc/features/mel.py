"""Log-mel spectrogram extraction.

Frames are centered at t*hop (reflect padding), windowed with a periodic
Hann of the analysis length, zero-padded to the FFT size, and projected
through an area-normalized triangular filterbank spaced linearly on the
mel scale from 0 Hz to Nyquist.  The log is natural with a 1e-5 floor.
"""

import numpy as np

from ..numcore.ops import frame_count, hann_window

LOG_FLOOR = 1e-5


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels=80, fft_size=2048, sample_rate=22050):
    """[n_mels, fft_size//2 + 1] triangular filters, each of unit area."""
    n_bins = fft_size // 2 + 1
    freqs = np.arange(n_bins, dtype=np.float64) * sample_rate / fft_size
    edges = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0),
                                  n_mels + 2))
    fb = np.zeros((n_mels, n_bins), dtype=np.float64)
    for m in range(n_mels):
        lo, ctr, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (freqs - lo) / max(ctr - lo, 1e-9)
        falling = (hi - freqs) / max(hi - ctr, 1e-9)
        fb[m] = np.maximum(0.0, np.minimum(rising, falling)) * (2.0 / (hi - lo))
    return fb.astype(np.float32)


def mel_spectrogram(buf, n_mels=80, fft_size=2048, win_length=1102, hop=275):
    """Log-mel frames [That, n_mels]; That = ceil(T/hop) + 1."""
    x = np.asarray(buf.samples, dtype=np.float64)
    t = x.shape[0]
    if t < win_length:
        raise ValueError(f"audio of {t} samples is shorter than one "
                         f"{win_length}-sample window")
    nf = frame_count(t, hop)
    pl = win_length // 2
    pr = (nf - 1) * hop + win_length - t - pl
    if pr >= t:
        raise ValueError("audio too short to center-pad")
    xp = np.pad(x, (pl, max(pr, 0)), mode="reflect")
    starts = np.arange(nf) * hop
    frames = xp[starts[:, None] + np.arange(win_length)[None, :]]
    frames = frames * hann_window(win_length, np.float64)
    mag = np.abs(np.fft.rfft(frames, n=fft_size, axis=1))
    mel = mag @ mel_filterbank(n_mels, fft_size, buf.sample_rate).T.astype(np.float64)
    return np.log(np.maximum(mel, LOG_FLOOR)).astype(np.float32)
