"""Inference throughput measurement.

Synthesizes benchmark features end to end, times the median of several
runs after a warmup, and reports samples per second plus the real-time
factor against the model's sample rate.  With ``kernels=both`` the same
workload runs under the compiled and the NumPy kernel backends so they
can be compared directly.
"""

import os
import platform
import time
from dataclasses import dataclass

import numpy as np

from . import backend
from .synthetic import make_bench_features
from .trainer.loop import load_generator
from .wavenet import synthesize_audio

# published figures for this model family, printed as context only
REFERENCE_CPU_SPS = 35_000
REFERENCE_GPU_SPS = 2_200_000


@dataclass
class BenchResult:
    kernel_backend: str
    n_samples: int
    run_seconds: list
    samples_per_sec: float
    real_time_factor: float
    spread: float


def _time_backend(model, feats, runs, name):
    prior = backend.use_backend(name)
    try:
        synthesize_audio(model, feats, seed=1)  # warmup
        times = []
        for _ in range(runs):
            t0 = time.perf_counter()
            audio = synthesize_audio(model, feats, seed=1)
            times.append(time.perf_counter() - t0)
    finally:
        backend.use_backend(prior)
    med = float(np.median(times))
    sps = audio.shape[0] / med
    spread = (max(times) - min(times)) / med
    return BenchResult(name, audio.shape[0], times, sps,
                       sps / model.cfg.sample_rate, spread), audio


def run_bench(ckpt_path, seconds=30.0, runs=5, kernels="auto", seed=0):
    """Returns (results, machine_info); audio is identical across runs."""
    model, run_cfg, _ = load_generator(ckpt_path)
    feats = make_bench_features(run_cfg, seconds, seed=seed)
    if kernels == "both":
        names = backend.available_backends()
    elif kernels == "auto":
        names = [backend.active_backend()]
    else:
        names = [kernels]
    results = []
    reference_audio = None
    for name in names:
        result, audio = _time_backend(model, feats, runs, name)
        results.append(result)
        if reference_audio is None:
            reference_audio = audio
    info = {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "cpu_count": os.cpu_count(),
        "numpy": np.__version__,
        "threads_hint": os.environ.get("OMP_NUM_THREADS", "default"),
    }
    return results, info


def format_report(results, info, sample_rate=22050):
    lines = ["inference benchmark (median of timed runs, 1 warmup)"]
    for key, value in info.items():
        lines.append(f"  {key}: {value}")
    for r in results:
        lines.append(
            f"  kernels={r.kernel_backend}: samples_per_sec={r.samples_per_sec:.0f} "
            f"rtf={r.real_time_factor:.3f} spread={r.spread * 100:.1f}% "
            f"({r.n_samples} samples x {len(r.run_seconds)} runs)")
    lines.append(
        f"  reference (reported for the original implementation, not asserted): "
        f"CPU ~{REFERENCE_CPU_SPS / 1000:.0f} kHz, GPU ~{REFERENCE_GPU_SPS / 1e6:.1f} MHz")
    return "\n".join(lines)
