"""Optimization, the training schedule, checkpoints, gradient checking."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradcheckReport, gradcheck
from .loop import (METRICS_COLUMNS, TrainConfig, Trainer, TrainingError,
                   format_row, train)
from .radam import OptimizerError, RAdam, radam_step

__all__ = [
    "RAdam", "radam_step", "OptimizerError",
    "save_checkpoint", "load_checkpoint", "CheckpointError",
    "Trainer", "TrainConfig", "TrainingError", "train", "format_row",
    "METRICS_COLUMNS", "gradcheck", "GradcheckReport",
]
