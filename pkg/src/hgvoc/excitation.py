"""Conditioning encoder, additive harmonic oscillator, and noise shaping.

The encoder turns conditioning frames into two control streams, one for
the oscillator and one for the noise generator.  The oscillator renders k
sinusoidal harmonics of the (gap-filled, upsampled) F0 track, masked above
3300 Hz and gated to zero on unvoiced stretches.  The noise path scales
white Gaussian noise by a learned envelope and filters it with a learned
257-tap FIR.  Stacking the gated harmonics with the shaped noise yields
the k+1 channel excitation the neural filter consumes.
"""

import math
from dataclasses import dataclass

import numpy as np

from .features.pitch import interpolate_unvoiced
from .numcore import Tensor, const, param
from .numcore import ops

MASK_CUTOFF_HZ = 3300.0
NOISE_FIR_LEN = 257
NOISE_GAIN_INIT = 1.0 / (2.0 * math.pi)


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def fir_impulse_init(rng, length):
    """Near pass-through start: unit tap at zero, tiny noise on the rest."""
    h = np.zeros(length, dtype=np.float32)
    h[0] = 1.0
    h[1:] = rng.normal(0.0, 1e-2, size=length - 1).astype(np.float32)
    return h


def build_conditioning(feats):
    """[That, n_mels + 2] frames: mel bands, F0 in cycles/sample, voicing.

    The F0 channel carries the gap-interpolated track divided by the
    sample rate; the voicing channel passes the raw flags.
    """
    feats.validate()
    f0_filled = interpolate_unvoiced(feats.f0_hz)
    f0_norm = (f0_filled / np.float32(feats.sample_rate)).astype(np.float32)
    return np.concatenate(
        [feats.mel,
         f0_norm[:, None],
         feats.uv.astype(np.float32)[:, None]], axis=1)


class Encoder:
    """Two width-256 convolutions (kernel 5) and a fully connected layer,
    split in half along channels into oscillator and noise controls."""

    def __init__(self, rng, n_in=82, width=256, kernel=5, prefix="encoder"):
        if width % 2:
            raise ValueError("encoder width must be even to split in half")
        self.n_in = n_in
        self.width = width
        self.kernel = kernel
        self.conv1_w = param(f"{prefix}.conv1.weight",
                             uniform_init(rng, (width, n_in, kernel), n_in * kernel))
        self.conv1_b = param(f"{prefix}.conv1.bias", np.zeros(width, np.float32))
        self.conv2_w = param(f"{prefix}.conv2.weight",
                             uniform_init(rng, (width, width, kernel), width * kernel))
        self.conv2_b = param(f"{prefix}.conv2.bias", np.zeros(width, np.float32))
        self.fc_w = param(f"{prefix}.fc.weight", uniform_init(rng, (width, width), width))
        self.fc_b = param(f"{prefix}.fc.bias", np.zeros(width, np.float32))

    def parameters(self):
        return [self.conv1_w, self.conv1_b, self.conv2_w, self.conv2_b,
                self.fc_w, self.fc_b]

    def __call__(self, g, cond):
        """cond: [That, n_in] tensor -> (osc, noise) halves of [That, width/2]."""
        if cond.shape[1] != self.n_in:
            raise ValueError(
                f"conditioning has {cond.shape[1]} channels, encoder wants {self.n_in}")
        x = ops.transpose(g, cond)
        x = ops.leaky_relu(g, ops.conv1d(g, x, self.conv1_w, self.conv1_b))
        x = ops.leaky_relu(g, ops.conv1d(g, x, self.conv2_w, self.conv2_b))
        x = ops.linear(g, ops.transpose(g, x), self.fc_w, self.fc_b)
        half = self.width // 2
        return (ops.slice_axis(g, x, 1, 0, half),
                ops.slice_axis(g, x, 1, half, self.width))


def harmonic_frequencies(f0_norm, k):
    """[T, k] normalized frequencies: column j is (j+1) times the track."""
    if k < 1:
        raise ValueError("need at least one harmonic")
    f0_norm = np.asarray(f0_norm, dtype=np.float64).reshape(-1)
    return np.outer(f0_norm, np.arange(1, k + 1, dtype=np.float64))


def harmonic_mask(freqs, sample_rate):
    """1 where a harmonic stays at or below 3300 Hz, else 0 (strictly above)."""
    cutoff = MASK_CUTOFF_HZ / float(sample_rate)
    return (np.asarray(freqs, dtype=np.float64) <= cutoff).astype(np.float32)


@dataclass
class OscillatorControls:
    amplitudes: Tensor    # [T, k], rows sum to one
    envelope: Tensor      # [T, 1]
    phases: np.ndarray    # [k] in [-pi, pi]


class OscillatorHead:
    """Projects encoder controls to per-harmonic loudness and an envelope."""

    def __init__(self, rng, n_in, k, prefix="oscillator"):
        if k < 1:
            raise ValueError("need at least one harmonic")
        self.k = k
        self.w = param(f"{prefix}.fc.weight", uniform_init(rng, (k + 1, n_in), n_in))
        self.b = param(f"{prefix}.fc.bias", np.zeros(k + 1, np.float32))

    def parameters(self):
        return [self.w, self.b]

    def __call__(self, g, h_osc, hop, rng):
        y = ops.modified_sigmoid(g, ops.linear(g, h_osc, self.w, self.b))
        amps = ops.slice_axis(g, y, 1, 0, self.k)
        env = ops.slice_axis(g, y, 1, self.k, self.k + 1)
        rows = ops.sum_axis(g, amps, axis=1, keepdims=True)
        amps = ops.div(g, amps, rows)
        amps = ops.upsample_linear(g, amps, hop)
        env = ops.upsample_linear(g, env, hop)
        phases = rng.uniform(-math.pi, math.pi, self.k).astype(np.float32)
        return OscillatorControls(amps, env, phases)


def render_harmonics(g, freqs, mask, amplitudes, envelope, phases):
    """Sinusoids at cumulative phase, scaled by loudness, mask, envelope."""
    theta = 2.0 * np.pi * np.cumsum(np.asarray(freqs, dtype=np.float64), axis=0)
    s = np.sin(theta + np.asarray(phases, dtype=np.float64)[None, :])
    gated_sin = const((np.asarray(mask, np.float64) * s).astype(np.float32))
    if not isinstance(amplitudes, Tensor):
        amplitudes = const(np.asarray(amplitudes, np.float32))
    if not isinstance(envelope, Tensor):
        envelope = const(np.asarray(envelope, np.float32).reshape(-1, 1))
    if amplitudes.shape != gated_sin.shape:
        raise ValueError(f"amplitudes {amplitudes.shape} vs harmonics {gated_sin.shape}")
    return ops.mul(g, ops.mul(g, amplitudes, gated_sin), envelope)


def gate_unvoiced(g, harmonics, uv_frames, hop):
    """Zero the oscillator wherever the frame-level voicing flag is zero."""
    flags = np.asarray(uv_frames, dtype=np.float32).reshape(-1, 1)
    v = np.repeat(flags, hop, axis=0)
    t = harmonics.shape[0]
    if v.shape[0] != t:
        raise ValueError(f"voicing covers {v.shape[0]} samples, harmonics {t}")
    return ops.mul(g, harmonics, const(v))


class NoiseShaper:
    """Learned gain and envelope on white noise, then a learned causal FIR."""

    def __init__(self, rng, n_in, fir_len=NOISE_FIR_LEN, prefix="noise"):
        self.w = param(f"{prefix}.fc.weight", uniform_init(rng, (1, n_in), n_in))
        self.b = param(f"{prefix}.fc.bias", np.zeros(1, np.float32))
        self.gain = param(f"{prefix}.gain", np.float32(NOISE_GAIN_INIT))
        self.fir = param(f"{prefix}.fir", fir_impulse_init(rng, fir_len))

    def parameters(self):
        return [self.w, self.b, self.gain, self.fir]

    def __call__(self, g, h_noise, hop, rng):
        beta = ops.modified_sigmoid(g, ops.linear(g, h_noise, self.w, self.b))
        beta = ops.upsample_linear(g, beta, hop)
        t = beta.shape[0]
        noise = const(rng.standard_normal(t).astype(np.float32).reshape(t, 1))
        z = ops.mul(g, ops.mul(g, beta, noise), self.gain)
        z = ops.reshape(g, z, (t,))
        return ops.fir_causal(g, z, self.fir)


def assemble_excitation(g, harmonics, noise):
    """Channel-stack [T, k] gated harmonics with the [T] noise signal."""
    t, _ = harmonics.shape
    if noise.shape != (t,):
        raise ValueError(f"noise length {noise.shape} vs harmonics {t}")
    return ops.concat(g, [harmonics, ops.reshape(g, noise, (t, 1))], axis=1)
