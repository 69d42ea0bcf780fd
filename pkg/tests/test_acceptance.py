"""Acceptance gate: one test per release criterion, tolerances pinned.

Each test prints a single ACCEPTANCE line so a log scan shows the verdict
per criterion.  The toy training regression is marked slow; it still runs
in a default ``pytest`` invocation.
"""

import time

import numpy as np
import pytest

from hgvoc import excitation as exc
from hgvoc import gan
from hgvoc import wavenet as wn
from hgvoc.cli import main
from hgvoc.config import RunConfig, config_to_meta
from hgvoc.features import AcousticFeatures, read_features, write_features
from hgvoc.numcore import const, ops
from hgvoc.synthetic import make_toy_dataset
from hgvoc.trainer import load_checkpoint, save_checkpoint

TOY_TRAIN_CONFIG = """\
k_harmonics=16
encoder_channels=64
wavenet.stacks=1
wavenet.layers=6
wavenet.channels=16
wavenet.kernel=5
disc.base_channels=1
train.batch=4
train.crop=11000
train.pretrain_steps=2000
train.total_steps=2500
train.lr_disc=0.001
train.seed=0
"""

MICRO_CLI_CONFIG = """\
n_mels=8
k_harmonics=4
encoder_channels=8
wavenet.stacks=1
wavenet.layers=2
wavenet.channels=4
wavenet.kernel=3
disc.base_channels=1
train.batch=2
train.crop=2750
train.pretrain_steps=2
train.total_steps=4
train.seed=3
"""


def report(name):
    print(f"\nACCEPTANCE PASS: {name}")


# ---------------------------------------------------------------------------

def test_gradient_suite():
    """Analytic gradients match float64 central differences on all paths."""
    t0 = time.perf_counter()
    assert main(["gradcheck", "--module", "all"]) == 0
    elapsed = time.perf_counter() - t0
    assert elapsed < 300, f"gradcheck took {elapsed:.0f}s, budget is 5 min"
    report(f"gradient suite (excitation, filter, gan) in {elapsed:.0f}s")


def test_dsp_oracle_suite():
    """Source-model primitives against brute-force predicates."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)

    # harmonic frequency ladder: column j is exactly (j+1) times the track
    f0 = rng.uniform(50, 400, 64) / 22050.0
    freqs = exc.harmonic_frequencies(f0, 24)
    for j in range(24):
        np.testing.assert_array_equal(freqs[:, j], (j + 1) * f0)

    # strict-inequality mask at the boundary: 150 Hz * 22 = 3300 Hz stays
    bound = exc.harmonic_mask(exc.harmonic_frequencies(
        np.array([150.0 / 22050.0]), 25), 22050)
    assert bound[0, 21] == 1.0 and bound[0, 22] == 0.0
    rand_f = exc.harmonic_frequencies(rng.uniform(30, 500, 300) / 22050.0, 40)
    np.testing.assert_array_equal(
        exc.harmonic_mask(rand_f, 22050),
        np.where(rand_f > 3300.0 / 22050.0, 0.0, 1.0))

    # cumulative phase equals an explicit running sum
    x = rng.standard_normal((200, 3))
    got = ops.cumsum_time(None, const(x)).data
    run = np.zeros(3)
    for i in range(200):
        run += x[i]
        np.testing.assert_allclose(got[i], run, atol=1e-6)

    # closed-form sine at 0.25 cycles/sample
    p = exc.render_harmonics(None, np.full((8, 1), 0.25), np.ones((8, 1)),
                             np.ones((8, 1), np.float32),
                             np.ones((8, 1), np.float32), np.zeros(1))
    np.testing.assert_allclose(p.data[:4, 0], [1.0, 0.0, -1.0, 0.0], atol=1e-6)

    # fully unvoiced input leaves exactly zero oscillator energy
    gated = exc.gate_unvoiced(None,
                              const(rng.standard_normal((48, 6)).astype(np.float32)),
                              np.zeros(12, np.uint8), 4)
    assert float((gated.data ** 2).sum()) == 0.0

    elapsed = time.perf_counter() - t0
    assert elapsed < 60
    report(f"source-model oracle suite in {elapsed:.1f}s")


def test_loss_identities():
    rng = np.random.default_rng(1)
    y = const(rng.standard_normal(512).astype(np.float32))
    zero = gan.multi_stft_loss(None, y, y, y, fft_sizes=(128, 64))
    assert float(zero.data) == 0.0

    combined = gan.generator_loss(None,
                                  const(np.asarray(1.0, np.float32)),
                                  const(np.asarray(0.5, np.float32)),
                                  const(np.asarray(0.01, np.float32)))
    assert float(combined.data) == pytest.approx(4.0, abs=1e-7)

    def outs(v):
        m = const(np.full((1, 6), v, np.float32))
        return [gan.ScaleOutput(features=[m], final=m) for _ in range(3)]

    assert float(gan.discriminator_loss(None, outs(1.0), outs(0.0)).data) == 0.0
    assert float(gan.adversarial_loss(None, outs(0.5)).data) == pytest.approx(0.25, abs=1e-7)
    report("loss identities (0, 4.0, 0, 0.25)")


def test_receptive_field():
    t0 = time.perf_counter()
    from test_filter import probe_receptive_field
    cfg = wn.WaveNetConfig()
    closed_form = 1 + 3 * 4 * (2 ** 10 - 1)
    assert cfg.receptive_field() == 12277 == closed_form
    assert probe_receptive_field(cfg) == 12277
    elapsed = time.perf_counter() - t0
    assert elapsed < 60
    report(f"receptive field 12277 by sensitivity probe in {elapsed:.1f}s")


def test_parameter_count():
    model = wn.GeneratorModel(wn.GeneratorConfig(), seed=0)
    n = wn.count_parameters(model)
    assert 1_000_000 <= n <= 1_600_000
    report(f"generator parameter count {n} within [1.0M, 1.6M]")


@pytest.mark.slow
def test_toy_training_regression(tmp_path_factory):
    """2000 spectral pretrain steps then 500 adversarial steps at desk scale.

    The 0.6 contraction bound was pinned from this implementation's own
    baseline run of the identical seeded configuration.
    """
    root = tmp_path_factory.mktemp("toytrain")
    t0 = time.perf_counter()
    make_toy_dataset(root / "wavs", seconds=60.0, n_files=8, seed=0)
    cfg_path = root / "toy.cfg"
    cfg_path.write_text(TOY_TRAIN_CONFIG)
    assert main(["prepare", "--wav-dir", str(root / "wavs"),
                 "--out-dir", str(root / "data"),
                 "--config", str(cfg_path)]) == 0
    assert main(["train", "--manifest", str(root / "data" / "manifest.tsv"),
                 "--config", str(cfg_path), "--out", str(root / "run"),
                 "--checkpoint-every", "500"]) == 0
    elapsed = time.perf_counter() - t0

    rows = (root / "run" / "metrics.csv").read_text().splitlines()[1:]
    assert len(rows) == 2500
    cells = [r.split(",") for r in rows]
    l_stft = np.array([float(c[1]) for c in cells])
    first = l_stft[:100].mean()
    final = l_stft[1900:2000].mean()
    ratio = final / first
    assert final <= 0.6 * first, f"pretrain contraction ratio {ratio:.3f} > 0.6"

    adv = cells[2000:]
    for c in adv:
        for field in c[1:6]:
            assert field != "" and np.isfinite(float(field))
    l_d = np.array([float(c[5]) for c in adv])
    assert np.any((l_d > 0) & (l_d <= 0.5)), "L_D never entered (0, 0.5]"

    # every trained tensor (parameters and optimizer moments) stays finite
    tensors, _ = load_checkpoint(root / "run" / "ckpt_00002500.hgck")
    for name, arr in tensors.items():
        assert np.all(np.isfinite(arr)), f"non-finite values in {name}"
    assert elapsed < 45 * 60, f"toy training took {elapsed / 60:.1f} min"
    report(f"toy training: contraction {ratio:.3f} <= 0.6, "
           f"adversarial losses finite, min L_D {l_d.min():.3f}, "
           f"{elapsed / 60:.1f} min")


@pytest.fixture(scope="module")
def micro_workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept_micro")
    make_toy_dataset(root / "wavs", seconds=4.5, n_files=3, seed=1)
    cfg = root / "micro.cfg"
    cfg.write_text(MICRO_CLI_CONFIG)
    assert main(["prepare", "--wav-dir", str(root / "wavs"),
                 "--out-dir", str(root / "data"), "--config", str(cfg)]) == 0
    assert main(["train", "--manifest", str(root / "data" / "manifest.tsv"),
                 "--config", str(cfg), "--out", str(root / "run"),
                 "--checkpoint-every", "2"]) == 0
    return root


def test_determinism(micro_workspace, tmp_path):
    root = micro_workspace
    ckpt = str(root / "run" / "ckpt_00000004.hgck")
    feats = str(root / "data" / "features" / "tone_00.hgf")
    w1, w2 = tmp_path / "a.wav", tmp_path / "b.wav"
    assert main(["synth", "--ckpt", ckpt, "--features", feats,
                 "--out", str(w1), "--seed", "11"]) == 0
    assert main(["synth", "--ckpt", ckpt, "--features", feats,
                 "--out", str(w2), "--seed", "11"]) == 0
    assert w1.read_bytes() == w2.read_bytes()

    # resume must continue the exact loss sequence of an unbroken run
    from hgvoc.trainer.loop import Trainer
    from test_trainer import micro_run_config, micro_utterances
    cfg = micro_run_config()
    cfg.train_total_steps = 9
    unbroken = Trainer(cfg, micro_utterances())
    full_rows = [unbroken.train_step() for _ in range(9)]
    part = Trainer(cfg, micro_utterances())
    for _ in range(4):
        part.train_step()
    mid = tmp_path / "mid.hgck"
    part.save(mid)
    resumed = Trainer.restore(mid, micro_utterances())
    for want in full_rows[4:]:
        got = resumed.train_step()
        assert got["L_stft"] == want["L_stft"]
        assert got["L_G"] == want["L_G"]
        assert got.get("L_D") == want.get("L_D")
    report("determinism: bit-identical synthesis, exact 5-step resume trace")


def test_format_round_trips(tmp_path):
    rng = np.random.default_rng(5)
    f0 = rng.uniform(80, 300, 25).astype(np.float32)
    f0[rng.uniform(size=25) < 0.3] = 0.0
    feats = AcousticFeatures(mel=rng.standard_normal((25, 80)).astype(np.float32),
                             f0_hz=f0, uv=(f0 > 0).astype(np.uint8),
                             hop_samples=275, sample_rate=22050)
    fpath = tmp_path / "r.hgf"
    write_features(fpath, feats)
    back = read_features(fpath)
    np.testing.assert_array_equal(back.mel, feats.mel)
    np.testing.assert_array_equal(back.f0_hz, feats.f0_hz)
    np.testing.assert_array_equal(back.uv, feats.uv)
    write_features(tmp_path / "r2.hgf", back)
    assert (tmp_path / "r.hgf").read_bytes() == (tmp_path / "r2.hgf").read_bytes()

    tensors = {"gen.w": rng.standard_normal((13, 7)).astype(np.float32),
               "optg.m.gen.w": np.zeros((13, 7), np.float32)}
    meta = config_to_meta(RunConfig())
    meta["step"] = 42
    cpath = tmp_path / "r.hgck"
    save_checkpoint(cpath, tensors, meta)
    t2, m2 = load_checkpoint(cpath)
    np.testing.assert_array_equal(t2["gen.w"], tensors["gen.w"])
    assert m2["step"] == "42"

    blob = bytearray(cpath.read_bytes())
    header_len = int.from_bytes(blob[8:12], "little")
    blob[12 + header_len + 3] ^= 0x08
    (tmp_path / "bad.hgck").write_bytes(bytes(blob))
    from hgvoc.trainer import CheckpointError
    with pytest.raises(CheckpointError, match="digest"):
        load_checkpoint(tmp_path / "bad.hgck")
    report("format round trips bit-exact; corrupted digest detected")


def test_benchmark_harness(micro_workspace, tmp_path, capsys):
    """Median-of-5 throughput with bounded run-to-run spread.

    The workload is the full-size model over several seconds of audio so
    that one scheduler hiccup on a busy box cannot dominate a run; the
    spread bound still gets up to three attempts. The synthesized audio
    itself is deterministic either way.
    """
    from hgvoc.bench import run_bench
    from hgvoc.trainer import save_checkpoint
    from hgvoc.wavenet import GeneratorConfig, GeneratorModel

    model = GeneratorModel(GeneratorConfig(), seed=0)
    tensors = {f"gen.{n}": p.data for n, p in model.named_parameters().items()}
    meta = config_to_meta(RunConfig())
    meta["step"] = 0
    full_ckpt = tmp_path / "bench_full.hgck"
    save_checkpoint(full_ckpt, tensors, meta)

    spread = None
    for _ in range(3):
        results, info = run_bench(str(full_ckpt), seconds=4.0, runs=5)
        spread = results[0].spread
        if spread < 0.10:
            break
    assert spread is not None and spread < 0.10, f"spread {spread:.1%}"
    assert results[0].samples_per_sec > 0
    assert results[0].real_time_factor > 0

    micro = str(micro_workspace / "run" / "ckpt_00000004.hgck")
    assert main(["bench", "--ckpt", micro, "--seconds", "0.5",
                 "--runs", "5"]) == 0
    out = capsys.readouterr().out
    assert "samples_per_sec=" in out and "rtf=" in out
    assert "35 kHz" in out  # published reference printed as context only
    report(f"benchmark harness: spread {spread:.1%} < 10%, "
           f"{results[0].samples_per_sec:.0f} samples/s "
           f"(rtf {results[0].real_time_factor:.2f})")
