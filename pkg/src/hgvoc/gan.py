"""Multi-scale discriminators and the training losses.

Three identical discriminators (separate weights) look at the waveform at
1x, 2x, and 4x downsampling, the downsampler being a stride-2 average
pool.  Each is a stack of large-kernel strided grouped convolutions with
leaky ReLU in between, so it scores phase-shifted signals similarly.

Losses: multi-resolution spectral distance on magnitudes and
log-magnitudes, least-squares adversarial terms, and feature matching on
discriminator activations.  Norms over map elements are means, keeping
loss magnitudes comparable across scales and lengths.
"""

import math
from dataclasses import dataclass

import numpy as np

from .excitation import uniform_init
from .numcore import Tensor, const, param
from .numcore import ops


@dataclass
class LossWeights:
    adv_weight: float = 4.0       # tau in the combined generator loss
    fm_weight: float = 25.0       # lambda inside the adversarial term
    stft_fft_sizes: tuple = (2048, 1024, 512, 256, 128, 64)
    overlap: float = 0.75         # hop = fft * (1 - overlap) = fft / 4

    def hop_for(self, fft_size):
        return int(round(fft_size * (1.0 - self.overlap)))


@dataclass
class DiscriminatorConfig:
    base_channels: int = 16
    n_strided: int = 4
    channel_growth: int = 4
    max_channel_factor: int = 64   # cap at base * 64 (1024 for the default)
    kernel_initial: int = 15
    kernel_strided: int = 41
    kernel_penultimate: int = 5
    kernel_final: int = 3
    stride: int = 4
    groups: int = 4
    n_scales: int = 3

    def channel_plan(self):
        chans = [1, self.base_channels]
        for _ in range(self.n_strided):
            nxt = min(chans[-1] * self.channel_growth,
                      self.base_channels * self.max_channel_factor)
            chans.append(nxt)
        chans += [chans[-1], 1]
        return chans

    def min_input_length(self):
        return self.stride ** self.n_strided


def _group_count(cfg, c_in, c_out):
    return math.gcd(cfg.groups, math.gcd(c_in, c_out))


class Discriminator:
    """One scale: 7 convolutions (default config) with leaky ReLU between."""

    def __init__(self, rng, cfg, prefix):
        self.cfg = cfg
        plan = cfg.channel_plan()
        kernels = ([cfg.kernel_initial]
                   + [cfg.kernel_strided] * cfg.n_strided
                   + [cfg.kernel_penultimate, cfg.kernel_final])
        strides = [1] + [cfg.stride] * cfg.n_strided + [1, 1]
        self.layers = []
        for i, (c_in, c_out, k, s) in enumerate(zip(plan[:-1], plan[1:],
                                                    kernels, strides)):
            groups = _group_count(cfg, c_in, c_out) if s > 1 else 1
            self.layers.append({
                "w": param(f"{prefix}.conv{i}.weight",
                           uniform_init(rng, (c_out, c_in // groups, k),
                                        (c_in // groups) * k)),
                "b": param(f"{prefix}.conv{i}.bias", np.zeros(c_out, np.float32)),
                "stride": s,
                "groups": groups,
            })

    def parameters(self):
        out = []
        for lay in self.layers:
            out += [lay["w"], lay["b"]]
        return out

    @property
    def n_layers(self):
        return len(self.layers)

    def __call__(self, g, audio_ct):
        """[1, T] in; returns every layer's output map, final map last."""
        maps = []
        x = audio_ct
        last = len(self.layers) - 1
        for i, lay in enumerate(self.layers):
            x = ops.conv1d(g, x, lay["w"], lay["b"], stride=lay["stride"],
                           groups=lay["groups"])
            if i != last:
                x = ops.leaky_relu(g, x)
            maps.append(x)
        return maps


@dataclass
class ScaleOutput:
    features: list      # all layer maps, shallow to deep
    final: Tensor       # convenience alias of features[-1]


class DiscriminatorBank:
    """Three same-architecture discriminators at 1x, 2x, 4x downsampling."""

    def __init__(self, cfg=None, seed=0):
        self.cfg = cfg or DiscriminatorConfig()
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x44495343]))
        self.scales = [Discriminator(rng, self.cfg, prefix=f"disc{k}")
                       for k in range(self.cfg.n_scales)]

    def parameters(self):
        out = []
        for d in self.scales:
            out += d.parameters()
        return out

    def named_parameters(self):
        return {p.name: p for p in self.parameters()}

    def discriminate(self, g, audio):
        """audio: [T] tensor -> list of ScaleOutput, one per scale."""
        t = audio.shape[0]
        x = ops.reshape(g, audio, (1, t))
        outputs = []
        for k, disc in enumerate(self.scales):
            if x.shape[1] < self.cfg.min_input_length():
                raise ValueError(
                    f"scale {k + 1} input of {x.shape[1]} samples is below the "
                    f"minimum span {self.cfg.min_input_length()}")
            maps = disc(g, x)
            outputs.append(ScaleOutput(features=maps, final=maps[-1]))
            if k + 1 < len(self.scales):
                x = ops.avg_pool1d(g, x, kernel=4, stride=2, pad=1)
        return outputs


# ----------------------------------------------------------------- spectral

def l_mag(g, y, y_hat, fft_sizes=LossWeights.stft_fft_sizes, log_floor=1e-7):
    """Mean over FFT sizes of L1 magnitude plus L1 log-magnitude distance."""
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    total = None
    for n in fft_sizes:
        s_ref = ops.stft_magnitude(g, y, n)
        s_hat = ops.stft_magnitude(g, y_hat, n)
        lin = ops.mean_all(g, ops.abs_(g, ops.sub(g, s_ref, s_hat)))
        log_ref = ops.log(g, ops.clamp_min(g, s_ref, log_floor))
        log_hat = ops.log(g, ops.clamp_min(g, s_hat, log_floor))
        lg = ops.mean_all(g, ops.abs_(g, ops.sub(g, log_ref, log_hat)))
        term = ops.add(g, lin, lg)
        total = term if total is None else ops.add(g, total, term)
    return ops.scale(g, total, 1.0 / len(fft_sizes))


def multi_stft_loss(g, y, y_hat, source_sum, fft_sizes=LossWeights.stft_fft_sizes,
                    log_floor=1e-7):
    """Spectral distance of the target to both the source mix and the output."""
    return ops.add(g,
                   l_mag(g, y, source_sum, fft_sizes, log_floor),
                   l_mag(g, y, y_hat, fft_sizes, log_floor))


# -------------------------------------------------------------- adversarial

def adversarial_loss(g, fake_outputs):
    """Mean over scales of mean squared (1 - D(fake))."""
    total = None
    for out in fake_outputs:
        one = const(np.asarray(1.0, dtype=out.final.dtype))
        term = ops.mean_all(g, ops.square(g, ops.sub(g, one, out.final)))
        total = term if total is None else ops.add(g, total, term)
    return ops.scale(g, total, 1.0 / len(fake_outputs))


def feature_matching_loss(g, real_outputs, fake_outputs):
    """Mean over scales and layers of mean L1 between activation maps."""
    if len(real_outputs) != len(fake_outputs):
        raise ValueError("scale count mismatch")
    terms = []
    for ro, fo in zip(real_outputs, fake_outputs):
        if len(ro.features) != len(fo.features):
            raise ValueError("layer structure mismatch")
        for fr, ff in zip(ro.features, fo.features):
            if fr.shape != ff.shape:
                raise ValueError(f"feature map mismatch: {fr.shape} vs {ff.shape}")
            terms.append(ops.mean_all(g, ops.abs_(g, ops.sub(g, fr, ff))))
    total = terms[0]
    for t in terms[1:]:
        total = ops.add(g, total, t)
    return ops.scale(g, total, 1.0 / len(terms))


def generator_loss(g, stft_term, adv_term, fm_term, weights=None):
    """stft + tau * (adversarial + lambda * feature_matching)."""
    w = weights or LossWeights()
    inner = ops.add(g, adv_term, ops.scale(g, fm_term, w.fm_weight))
    return ops.add(g, stft_term, ops.scale(g, inner, w.adv_weight))


def discriminator_loss(g, real_outputs, fake_outputs):
    """Mean over scales of mean sq.(1 - D(real)) + mean sq. D(fake)."""
    if len(real_outputs) != len(fake_outputs):
        raise ValueError("scale count mismatch")
    total = None
    for ro, fo in zip(real_outputs, fake_outputs):
        one = const(np.asarray(1.0, dtype=ro.final.dtype))
        real_term = ops.mean_all(g, ops.square(g, ops.sub(g, one, ro.final)))
        fake_term = ops.mean_all(g, ops.square(g, fo.final))
        term = ops.add(g, real_term, fake_term)
        total = term if total is None else ops.add(g, total, term)
    return ops.scale(g, total, 1.0 / len(real_outputs))
