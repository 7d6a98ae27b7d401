"""Alternating adversarial training, optimization, and checkpointing."""

from .checkpoint import CheckpointError, LoadedCheckpoint, load_checkpoint, save_checkpoint
from .loop import (
    MODES,
    TrainConfig,
    TrainingDiverged,
    TrainResult,
    TrainState,
    disc_step,
    group_examples_by_domain,
    qa_step,
    train,
)
from .optim import Adam, clip_global_norm

__all__ = [
    "MODES",
    "Adam",
    "CheckpointError",
    "LoadedCheckpoint",
    "TrainConfig",
    "TrainResult",
    "TrainState",
    "TrainingDiverged",
    "clip_global_norm",
    "disc_step",
    "group_examples_by_domain",
    "load_checkpoint",
    "qa_step",
    "save_checkpoint",
    "train",
]
