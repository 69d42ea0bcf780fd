"""Two-phase training: spectral-only warmup, then adversarial fine-tuning.

Before the switch step the generator minimizes only the multi-resolution
spectral loss.  After it, each batch first updates the discriminators and
then the generator on the combined loss.  Every random draw derives from
(seed, step, item), so a run is reproducible step for step and a resumed
run continues the exact same sequence.
"""

import os
import time
from dataclasses import dataclass

import numpy as np

from .. import gan
from ..config import (config_from_meta, config_to_meta,
                      discriminator_config, generator_config)
from ..features import load_manifest_data
from ..numcore import Graph, backward, const, frozen
from ..numcore import ops
from ..wavenet import GeneratorModel, synthesize
from .checkpoint import load_checkpoint, save_checkpoint
from .radam import OptimizerError, RAdam

METRICS_COLUMNS = ("step", "L_stft", "L_adv", "L_fm", "L_G", "L_D", "wall_ms")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    batch_size: int = 16
    crop_samples: int = 11000
    pretrain_steps: int = 100000
    total_steps: int = 500000
    lr_gen: float = 1e-4
    lr_disc: float = 5e-5
    eps: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.pretrain_steps > self.total_steps:
            raise ValueError("pretrain_steps cannot exceed total_steps")
        if min(self.lr_gen, self.lr_disc) <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")

    @classmethod
    def from_run(cls, rc):
        return cls(batch_size=rc.train_batch, crop_samples=rc.train_crop,
                   pretrain_steps=rc.train_pretrain_steps,
                   total_steps=rc.train_total_steps,
                   lr_gen=rc.train_lr_gen, lr_disc=rc.train_lr_disc,
                   seed=rc.train_seed)


def _item_rng(seed, step, item, purpose):
    return np.random.default_rng(np.random.SeedSequence([seed, step, item, purpose]))


class Trainer:
    def __init__(self, run_cfg, utterances):
        self.run_cfg = run_cfg
        self.tcfg = TrainConfig.from_run(run_cfg)
        self.utterances = utterances
        self.gen = GeneratorModel(generator_config(run_cfg), seed=self.tcfg.seed)
        self.disc = gan.DiscriminatorBank(discriminator_config(run_cfg),
                                          seed=self.tcfg.seed)
        self.opt_g = RAdam(self.gen.parameters(), self.tcfg.lr_gen,
                           eps=self.tcfg.eps)
        self.opt_d = RAdam(self.disc.parameters(), self.tcfg.lr_disc,
                           eps=self.tcfg.eps)
        self.weights = gan.LossWeights()
        self.step = 0
        self.last_checkpoint = None

    # ------------------------------------------------------------ persist

    def save(self, path):
        tensors = {}
        for name, p in self.gen.named_parameters().items():
            tensors[f"gen.{name}"] = p.data
        for name, p in self.disc.named_parameters().items():
            tensors[f"disc.{name}"] = p.data
        tensors.update(self.opt_g.state_tensors("optg"))
        tensors.update(self.opt_d.state_tensors("optd"))
        meta = config_to_meta(self.run_cfg)
        meta["step"] = self.step
        meta["optg.t"] = self.opt_g.t
        meta["optd.t"] = self.opt_d.t
        save_checkpoint(path, tensors, meta)
        self.last_checkpoint = str(path)

    @classmethod
    def restore(cls, path, utterances):
        tensors, meta = load_checkpoint(path)
        run_cfg = config_from_meta(meta)
        trainer = cls(run_cfg, utterances)
        trainer.load_tensors(tensors, meta)
        trainer.last_checkpoint = str(path)
        return trainer

    def load_tensors(self, tensors, meta):
        for name, p in self.gen.named_parameters().items():
            p.data[...] = tensors[f"gen.{name}"].reshape(p.data.shape)
        for name, p in self.disc.named_parameters().items():
            p.data[...] = tensors[f"disc.{name}"].reshape(p.data.shape)
        self.opt_g.load_state_tensors("optg", tensors, meta["optg.t"])
        self.opt_d.load_state_tensors("optd", tensors, meta["optd.t"])
        self.step = int(meta["step"])

    # ------------------------------------------------------------- stepping

    def train_step(self):
        """One optimization step; returns the metrics row as a dict."""
        self.step += 1
        step = self.step
        t0 = time.perf_counter()
        tc = self.tcfg
        b = tc.batch_size
        rng_data = _item_rng(tc.seed, step, 0, 0)
        batch = [self._sample(rng_data) for _ in range(b)]
        adversarial = step > tc.pretrain_steps
        row = {"step": step}

        if adversarial:
            self.opt_d.zero_grad()
            ld_total = 0.0
            for i, (audio, feats) in enumerate(batch):
                fake = synthesize(None, self.gen, feats,
                                  _item_rng(tc.seed, step, i, 1)).y_hat
                g = Graph()
                real_out = self.disc.discriminate(g, const(audio))
                fake_out = self.disc.discriminate(g, const(fake.data))
                ld = gan.discriminator_loss(g, real_out, fake_out)
                self._check_finite(ld, "L_D")
                backward(g, ops.scale(g, ld, 1.0 / b))
                ld_total += float(ld.data)
            self._opt_step(self.opt_d)
            row["L_D"] = ld_total / b

        self.opt_g.zero_grad()
        sums = {"L_stft": 0.0, "L_adv": 0.0, "L_fm": 0.0, "L_G": 0.0}
        for i, (audio, feats) in enumerate(batch):
            g = Graph()
            res = synthesize(g, self.gen, feats, _item_rng(tc.seed, step, i, 2))
            y = const(audio)
            l_stft = gan.multi_stft_loss(g, y, res.y_hat, res.source_sum,
                                         self.weights.stft_fft_sizes)
            if adversarial:
                with frozen(self.disc.parameters()):
                    fake_out = self.disc.discriminate(g, res.y_hat)
                    real_out = self.disc.discriminate(g, y)
                l_adv = gan.adversarial_loss(g, fake_out)
                l_fm = gan.feature_matching_loss(g, real_out, fake_out)
                l_g = gan.generator_loss(g, l_stft, l_adv, l_fm, self.weights)
                sums["L_adv"] += float(l_adv.data)
                sums["L_fm"] += float(l_fm.data)
            else:
                l_g = l_stft
            self._check_finite(l_g, "L_G")
            backward(g, ops.scale(g, l_g, 1.0 / b))
            sums["L_stft"] += float(l_stft.data)
            sums["L_G"] += float(l_g.data)
        self._opt_step(self.opt_g)

        row["L_stft"] = sums["L_stft"] / b
        row["L_G"] = sums["L_G"] / b
        if adversarial:
            row["L_adv"] = sums["L_adv"] / b
            row["L_fm"] = sums["L_fm"] / b
        row["wall_ms"] = (time.perf_counter() - t0) * 1e3
        return row

    def _sample(self, rng):
        from ..features import sample_training_crop
        return sample_training_crop(self.utterances, rng, self.tcfg.crop_samples)

    def _check_finite(self, loss, name):
        if not np.isfinite(float(loss.data)):
            raise TrainingError(
                f"non-finite {name} at step {self.step}; last good checkpoint: "
                f"{self.last_checkpoint or 'none written yet'}")

    def _opt_step(self, opt):
        try:
            opt.step()
        except OptimizerError as e:
            raise TrainingError(
                f"{e}; last good checkpoint: "
                f"{self.last_checkpoint or 'none written yet'}") from e

    # ----------------------------------------------------------------- run

    def run(self, out_dir, checkpoint_every=0, on_row=None):
        """Step to total_steps, logging metrics.csv and periodic checkpoints."""
        os.makedirs(out_dir, exist_ok=True)
        metrics_path = os.path.join(out_dir, "metrics.csv")
        fresh = self.step == 0 or not os.path.exists(metrics_path)
        with open(metrics_path, "w" if fresh else "a", encoding="utf-8") as fh:
            if fresh:
                fh.write(",".join(METRICS_COLUMNS) + "\n")
            while self.step < self.tcfg.total_steps:
                row = self.train_step()
                fh.write(format_row(row) + "\n")
                fh.flush()
                if on_row is not None:
                    on_row(row)
                if checkpoint_every and self.step % checkpoint_every == 0:
                    self.save(os.path.join(out_dir,
                                           f"ckpt_{self.step:08d}.hgck"))
        final = os.path.join(out_dir, f"ckpt_{self.step:08d}.hgck")
        self.save(final)
        return metrics_path, final


def format_row(row):
    cells = []
    for col in METRICS_COLUMNS:
        v = row.get(col)
        if v is None:
            cells.append("")
        elif col == "step":
            cells.append(str(v))
        else:
            cells.append(repr(float(v)))
    return ",".join(cells)


def load_generator(path):
    """Rebuild a generator from a checkpoint; returns (model, run_cfg, meta)."""
    from .checkpoint import CheckpointError
    tensors, meta = load_checkpoint(path)
    run_cfg = config_from_meta(meta)
    model = GeneratorModel(generator_config(run_cfg), seed=0)
    for name, p in model.named_parameters().items():
        key = f"gen.{name}"
        if key not in tensors:
            raise CheckpointError(f"{path}: missing tensor {key}")
        p.data[...] = tensors[key].reshape(p.data.shape)
    return model, run_cfg, meta


def train(manifest_path, run_cfg, out_dir, checkpoint_every=0, resume=None,
          on_row=None):
    """Manifest in, checkpoint series and metrics out."""
    tc = TrainConfig.from_run(run_cfg)
    utterances = load_manifest_data(manifest_path, min_samples=tc.crop_samples)
    if not utterances:
        raise TrainingError("dataset is empty after length filtering")
    if resume:
        trainer = Trainer.restore(resume, utterances)
        if generator_config(trainer.run_cfg) != generator_config(run_cfg):
            raise TrainingError(
                f"resume config mismatch: checkpoint model is "
                f"{generator_config(trainer.run_cfg)}, config asks for "
                f"{generator_config(run_cfg)}")
        for field in ("batch_size", "crop_samples", "pretrain_steps",
                      "lr_gen", "lr_disc", "seed"):
            have, want = getattr(trainer.tcfg, field), getattr(tc, field)
            if have != want:
                raise TrainingError(
                    f"resume config mismatch: {field} is {have} in the "
                    f"checkpoint but {want} in the config")
        # only the horizon may be extended on resume
        trainer.tcfg.total_steps = tc.total_steps
    else:
        trainer = Trainer(run_cfg, utterances)
    return trainer.run(out_dir, checkpoint_every=checkpoint_every, on_row=on_row)
