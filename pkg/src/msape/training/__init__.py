from .checkpoint import (
    Checkpoint,
    CheckpointFormatError,
    CheckpointStore,
    StorageError,
    average_checkpoints,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
)
from .loss import joint_loss, smoothed_loss, smoothing_targets
from .optim import AdamState, adam_update, lr_at
from .trainer import DivergenceError, TrainConfig, Trainer, batch_loss, validation_perplexity

__all__ = [
    "AdamState",
    "Checkpoint",
    "CheckpointFormatError",
    "CheckpointStore",
    "DivergenceError",
    "StorageError",
    "TrainConfig",
    "Trainer",
    "adam_update",
    "average_checkpoints",
    "batch_loss",
    "joint_loss",
    "load_checkpoint",
    "lr_at",
    "model_from_checkpoint",
    "save_checkpoint",
    "smoothed_loss",
    "smoothing_targets",
    "validation_perplexity",
]
