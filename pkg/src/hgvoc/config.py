"""Run configuration: typed key=value text files.

Example::

    sample_rate=22050
    wavenet.stacks=3
    train.batch=16
    paths.data=/data/wavs

Unknown keys are errors.  Defaults are the full-size training recipe;
toy runs override the handful of size and schedule keys.
"""

from dataclasses import dataclass, fields

from .gan import DiscriminatorConfig
from .wavenet import GeneratorConfig, WaveNetConfig


class ConfigError(ValueError):
    """Unknown key, bad value, or unreadable config file."""


@dataclass
class RunConfig:
    sample_rate: int = 22050
    hop: int = 275
    win: int = 1102
    fft: int = 2048
    n_mels: int = 80
    k_harmonics: int = 64
    encoder_channels: int = 256
    wavenet_stacks: int = 3
    wavenet_layers: int = 10
    wavenet_channels: int = 64
    wavenet_kernel: int = 5
    disc_base_channels: int = 16
    train_batch: int = 16
    train_crop: int = 11000
    train_pretrain_steps: int = 100000
    train_total_steps: int = 500000
    train_lr_gen: float = 1e-4
    train_lr_disc: float = 5e-5
    train_seed: int = 0
    paths_data: str = ""
    paths_features: str = ""
    paths_checkpoints: str = ""


_KEY_TO_FIELD = {
    "sample_rate": "sample_rate",
    "hop": "hop",
    "win": "win",
    "fft": "fft",
    "n_mels": "n_mels",
    "k_harmonics": "k_harmonics",
    "encoder_channels": "encoder_channels",
    "wavenet.stacks": "wavenet_stacks",
    "wavenet.layers": "wavenet_layers",
    "wavenet.channels": "wavenet_channels",
    "wavenet.kernel": "wavenet_kernel",
    "disc.base_channels": "disc_base_channels",
    "train.batch": "train_batch",
    "train.crop": "train_crop",
    "train.pretrain_steps": "train_pretrain_steps",
    "train.total_steps": "train_total_steps",
    "train.lr_gen": "train_lr_gen",
    "train.lr_disc": "train_lr_disc",
    "train.seed": "train_seed",
    "paths.data": "paths_data",
    "paths.features": "paths_features",
    "paths.checkpoints": "paths_checkpoints",
}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(field_name, raw):
    kind = _FIELD_TYPES[field_name]
    try:
        if kind == "int" or kind is int:
            return int(raw)
        if kind == "float" or kind is float:
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f"bad value for {field_name}: {raw!r}") from e


def parse_config(path):
    cfg = RunConfig()
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep:
                raise ConfigError(f"{path}:{ln}: expected key=value, got {line!r}")
            if key not in _KEY_TO_FIELD:
                raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
            field_name = _KEY_TO_FIELD[key]
            setattr(cfg, field_name, _coerce(field_name, value.strip()))
    return cfg


def config_to_meta(cfg, prefix="cfg."):
    meta = {}
    for key, field_name in _KEY_TO_FIELD.items():
        meta[prefix + key] = getattr(cfg, field_name)
    return meta


def config_from_meta(meta, prefix="cfg."):
    cfg = RunConfig()
    for key, field_name in _KEY_TO_FIELD.items():
        if prefix + key in meta:
            setattr(cfg, field_name, _coerce(field_name, meta[prefix + key]))
    return cfg


def generator_config(cfg):
    return GeneratorConfig(
        sample_rate=cfg.sample_rate,
        hop=cfg.hop,
        n_mels=cfg.n_mels,
        k_harmonics=cfg.k_harmonics,
        encoder_channels=cfg.encoder_channels,
        wavenet=WaveNetConfig(stacks=cfg.wavenet_stacks,
                              layers_per_stack=cfg.wavenet_layers,
                              channels=cfg.wavenet_channels,
                              kernel=cfg.wavenet_kernel))


def discriminator_config(cfg):
    return DiscriminatorConfig(base_channels=cfg.disc_base_channels)


def write_config_template(path):
    cfg = RunConfig()
    lines = [f"{key}={getattr(cfg, field_name)}"
             for key, field_name in _KEY_TO_FIELD.items()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
