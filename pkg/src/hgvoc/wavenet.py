"""Dilated-convolution neural filter and the complete generator.

The filter is a plain residual stack: per layer a dilated convolution of
the running signal plus a 1x1 projection of the sample-level conditioning,
a tanh, then a 1x1 residual projection added back.  No gating, no skip
collection, constant channel width.  Its output passes through a learned
257-tap FIR to become the synthesized waveform.
"""

from dataclasses import dataclass, field

import numpy as np

from . import excitation as exc
from .numcore import Tensor, const, param
from .numcore import ops


@dataclass
class WaveNetConfig:
    stacks: int = 3
    layers_per_stack: int = 10
    channels: int = 64
    kernel: int = 5
    dilation_base: int = 2

    def __post_init__(self):
        if min(self.stacks, self.layers_per_stack, self.channels, self.kernel) < 1:
            raise ValueError("all filter dimensions must be at least 1")

    def dilations(self):
        return [self.dilation_base ** l
                for _ in range(self.stacks)
                for l in range(self.layers_per_stack)]

    def receptive_field(self):
        per_layer = sum((self.kernel - 1) * d for d in self.dilations())
        return 1 + per_layer


@dataclass
class GeneratorConfig:
    sample_rate: int = 22050
    hop: int = 275
    n_mels: int = 80
    k_harmonics: int = 64
    encoder_channels: int = 256
    fir_length: int = 257
    wavenet: WaveNetConfig = field(default_factory=WaveNetConfig)

    @property
    def n_cond(self):
        return self.n_mels + 2


class WaveNet:
    def __init__(self, rng, cfg, n_in, n_cond, prefix="wavenet"):
        ch, k = cfg.channels, cfg.kernel
        self.cfg = cfg
        self.proj_in_w = param(f"{prefix}.in.weight",
                               exc.uniform_init(rng, (ch, n_in, 1), n_in))
        self.proj_in_b = param(f"{prefix}.in.bias", np.zeros(ch, np.float32))
        self.layers = []
        for i, d in enumerate(cfg.dilations()):
            lp = f"{prefix}.layer{i}"
            self.layers.append({
                "dilation": d,
                "conv_w": param(f"{lp}.conv.weight",
                                exc.uniform_init(rng, (ch, ch, k), ch * k)),
                "conv_b": param(f"{lp}.conv.bias", np.zeros(ch, np.float32)),
                "cond_w": param(f"{lp}.cond.weight",
                                exc.uniform_init(rng, (ch, n_cond, 1), n_cond)),
                "cond_b": param(f"{lp}.cond.bias", np.zeros(ch, np.float32)),
                "res_w": param(f"{lp}.res.weight",
                               exc.uniform_init(rng, (ch, ch, 1), ch)),
                "res_b": param(f"{lp}.res.bias", np.zeros(ch, np.float32)),
            })
        self.proj_out_w = param(f"{prefix}.out.weight",
                                exc.uniform_init(rng, (1, ch, 1), ch))
        self.proj_out_b = param(f"{prefix}.out.bias", np.zeros(1, np.float32))

    def parameters(self):
        out = [self.proj_in_w, self.proj_in_b, self.proj_out_w, self.proj_out_b]
        for lay in self.layers:
            out += [lay["conv_w"], lay["conv_b"], lay["cond_w"], lay["cond_b"],
                    lay["res_w"], lay["res_b"]]
        return out

    def __call__(self, g, excitation_tc, cond_tc, activation="tanh"):
        """Filter [T, C_exc] excitation under [T, n_cond] conditioning -> [T].

        ``activation`` can be set to ``identity`` by diagnostics that probe
        the residual wiring; normal operation is tanh.
        """
        t = excitation_tc.shape[0]
        if cond_tc.shape[0] != t:
            raise ValueError(
                f"conditioning length {cond_tc.shape[0]} != excitation {t}")
        x = ops.conv1d(g, ops.transpose(g, excitation_tc),
                       self.proj_in_w, self.proj_in_b)
        cond = ops.transpose(g, cond_tc)
        for lay in self.layers:
            pre = ops.add(g,
                          ops.conv1d(g, x, lay["conv_w"], lay["conv_b"],
                                     dilation=lay["dilation"]),
                          ops.conv1d(g, cond, lay["cond_w"], lay["cond_b"]))
            h = pre if activation == "identity" else ops.activation(g, pre, activation)
            x = ops.add(g, x, ops.conv1d(g, h, lay["res_w"], lay["res_b"]))
        w = ops.conv1d(g, x, self.proj_out_w, self.proj_out_b)
        return ops.reshape(g, w, (t,))


def output_fir(g, signal, taps, fir_length=None):
    """Causal learned FIR on the filter output, length preserved."""
    if taps.shape[0] != taps.size:
        raise ValueError("FIR taps must be 1-d")
    if fir_length is not None and taps.shape[0] != fir_length:
        raise ValueError(f"FIR has {taps.shape[0]} taps, expected {fir_length}")
    return ops.fir_causal(g, signal, taps)


class GeneratorModel:
    """Encoder, oscillator head, noise shaper, neural filter, output FIR."""

    def __init__(self, cfg=None, seed=0):
        self.cfg = cfg or GeneratorConfig()
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x47454E]))
        c = self.cfg
        self.encoder = exc.Encoder(rng, n_in=c.n_cond, width=c.encoder_channels)
        half = c.encoder_channels // 2
        self.osc_head = exc.OscillatorHead(rng, half, c.k_harmonics)
        self.noise = exc.NoiseShaper(rng, half, fir_len=c.fir_length)
        self.wavenet = WaveNet(rng, c.wavenet, n_in=c.k_harmonics + 1,
                               n_cond=c.n_cond)
        self.h_output = param("output.fir", exc.fir_impulse_init(rng, c.fir_length))

    def parameters(self):
        return (self.encoder.parameters() + self.osc_head.parameters()
                + self.noise.parameters() + self.wavenet.parameters()
                + [self.h_output])

    def named_parameters(self):
        return {p.name: p for p in self.parameters()}


def count_parameters(model):
    return int(sum(p.size for p in model.parameters() if p.trainable))


@dataclass
class SynthResult:
    y_hat: Tensor      # [T] waveform
    source_sum: Tensor  # [T] channel-summed excitation
    excitation: Tensor  # [T, k+1]


def synthesize(g, model, feats, rng):
    """Run the full chain from acoustic features to waveform.

    Draws the oscillator phases first and the noise samples second from
    ``rng``, so a fixed seed reproduces the output bit for bit.  Returns
    the waveform, the channel-summed excitation (the spectral-loss target
    for the source), and the excitation itself; lengths are all
    ``num_frames * hop``.
    """
    cfg = model.cfg
    for name, have, want in [("n_mels", feats.n_mels, cfg.n_mels),
                             ("hop_samples", feats.hop_samples, cfg.hop),
                             ("sample_rate", feats.sample_rate, cfg.sample_rate)]:
        if have != want:
            raise ValueError(
                f"feature/model mismatch: features have {name}={have}, "
                f"model expects {want}")

    cond = const(exc.build_conditioning(feats), name="conditioning")
    h_osc, h_noise = model.encoder(g, cond)
    controls = model.osc_head(g, h_osc, cfg.hop, rng)

    f0_frames = exc.interpolate_unvoiced(feats.f0_hz) / np.float32(cfg.sample_rate)
    f0_samples = ops.upsample_linear(
        None, const(f0_frames.reshape(-1, 1)), cfg.hop).data[:, 0]
    freqs = exc.harmonic_frequencies(f0_samples, cfg.k_harmonics)
    mask = exc.harmonic_mask(freqs, cfg.sample_rate)

    harm = exc.render_harmonics(g, freqs, mask, controls.amplitudes,
                                controls.envelope, controls.phases)
    gated = exc.gate_unvoiced(g, harm, feats.uv, cfg.hop)
    noise = model.noise(g, h_noise, cfg.hop, rng)
    excite = exc.assemble_excitation(g, gated, noise)
    source_sum = ops.sum_axis(g, excite, axis=1)

    cond_samples = ops.upsample_linear(g, cond, cfg.hop)
    w = model.wavenet(g, excite, cond_samples)
    y_hat = output_fir(g, w, model.h_output, fir_length=cfg.fir_length)
    return SynthResult(y_hat, source_sum, excite)


def synthesize_audio(model, feats, seed=0):
    """Inference-only synthesis: no tape, returns a float32 waveform."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x53594E]))
    return synthesize(None, model, feats, rng).y_hat.data.copy()
