"""Optimizer, training loop, loss traces and the gradient-check suite."""

from .sgd import TrainConfig, lr_at, sgd_step
from .trainer import (
    EpochRecord,
    TrainResult,
    TrainingSample,
    read_loss_csv,
    train,
    write_loss_csv,
)
from .diagnostics import run_gradcheck_suite

__all__ = [
    "TrainConfig",
    "lr_at",
    "sgd_step",
    "EpochRecord",
    "TrainResult",
    "TrainingSample",
    "read_loss_csv",
    "train",
    "write_loss_csv",
    "run_gradcheck_suite",
]
