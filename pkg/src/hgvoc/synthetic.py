"""Synthetic audio and features: benchmark inputs and the toy dataset.

The benchmark features are dataset-free: a sawtooth-style F0 sweep between
80 and 300 Hz with short unvoiced gaps and random mel frames.  The toy
training dataset is a bank of harmonic tones with pitch glides, a slow
amplitude envelope, a noise floor, and silent stretches, written as WAV
files so the normal preparation pipeline can consume them.
"""

import os

import numpy as np

from .features import AcousticFeatures, AudioBuffer, save_wav


def make_bench_features(run_cfg, seconds, seed=0):
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x42454E]))
    sr, hop = run_cfg.sample_rate, run_cfg.hop
    t_hat = max(2, int(round(seconds * sr / hop)))
    pos = np.arange(t_hat, dtype=np.float64)
    sweep = (pos * hop / sr) / 1.25 % 1.0  # one 80->300 Hz ramp per 1.25 s
    f0 = (80.0 + 220.0 * sweep).astype(np.float32)
    uv = np.ones(t_hat, np.uint8)
    gap = (sweep > 0.96) | (sweep < 0.02)  # short unvoiced gap at each reset
    f0[gap] = 0.0
    uv[gap] = 0
    mel = rng.normal(-5.0, 2.0, (t_hat, run_cfg.n_mels)).astype(np.float32)
    return AcousticFeatures(mel=mel, f0_hz=f0, uv=uv, hop_samples=hop,
                            sample_rate=sr)


def _glide_tone(rng, n, sr):
    """Harmonic tone with a pitch glide, vibrato, and a noise floor."""
    t = np.arange(n) / sr
    lo, hi = rng.uniform(90, 150), rng.uniform(180, 280)
    # up-down glide across the clip plus gentle vibrato
    ramp = 0.5 - 0.5 * np.cos(2 * np.pi * t / t[-1])
    f0 = lo * (hi / lo) ** ramp
    f0 = f0 * (1.0 + 0.01 * np.sin(2 * np.pi * 5.0 * t))
    phase = 2 * np.pi * np.cumsum(f0) / sr
    x = np.zeros(n)
    for h in range(1, 9):
        amp = rng.uniform(0.5, 1.0) / h
        x += amp * np.sin(h * phase + rng.uniform(-np.pi, np.pi))
    envelope = 0.55 + 0.4 * np.sin(2 * np.pi * rng.uniform(0.3, 0.8) * t
                                   + rng.uniform(0, np.pi))
    x *= envelope
    x += 0.01 * rng.standard_normal(n)
    # silent stretch at a random spot so unvoiced frames appear
    gap = int(0.08 * n)
    start = rng.integers(int(0.2 * n), int(0.7 * n))
    x[start:start + gap] *= np.linspace(1, 0, gap) ** 2
    return x


def make_toy_dataset(out_dir, seconds=60.0, n_files=8, sr=22050, seed=0):
    """Write the toy training WAVs; returns the list of file paths."""
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x544F59]))
    per_file = int(seconds * sr / n_files)
    paths = []
    for i in range(n_files):
        x = _glide_tone(rng, per_file, sr)
        x = 0.7 * x / np.max(np.abs(x))
        path = os.path.join(out_dir, f"tone_{i:02d}.wav")
        save_wav(path, AudioBuffer(x.astype(np.float32), sr))
        paths.append(path)
    return paths
