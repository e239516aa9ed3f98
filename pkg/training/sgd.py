"""SGD with momentum, coupled weight decay and a step learning-rate schedule."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from autodiff import Grid
from model.state import ModelState

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr0: float = 1e-6
    momentum: float = 0.9
    weight_decay: float = 2e-4
    batch_size: int = 10
    epochs: int = 60
    lr_drop_period: int = 20
    lr_drop_factor: float = 0.1
    seed: int = 0
    flip_augment: bool = False
    checkpoint_every: int = 0  # epochs; 0 disables

    def __post_init__(self) -> None:
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not 0.0 < self.lr_drop_factor <= 1.0:
            raise ValueError(f"lr_drop_factor must lie in (0, 1], got {self.lr_drop_factor}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr_drop_period < 1:
            raise ValueError(f"lr_drop_period must be >= 1, got {self.lr_drop_period}")
        if self.epochs < 0 or self.lr0 < 0 or self.weight_decay < 0:
            raise ValueError("epochs, lr0 and weight_decay must be non-negative")


def lr_at(cfg: TrainConfig, epoch: int) -> float:
    """lr0 * factor^floor(epoch / period), epochs counted from 0."""
    return cfg.lr0 * cfg.lr_drop_factor ** (epoch // cfg.lr_drop_period)


def sgd_step(
    state: ModelState,
    gradients: dict[str, np.ndarray] | None,
    cfg: TrainConfig,
    epoch: int,
) -> ModelState:
    """
    One update of every parameter, in place:
        v <- momentum * v + g + weight_decay * theta
        theta <- theta - lr(epoch) * v

    Args:
        state: Parameters and momentum buffers
        gradients: Per-parameter gradients; None reads each node's grad buffer
        cfg: Optimizer settings
        epoch: Zero-based epoch index for the schedule

    Raises:
        ValueError: a gradient is missing or not finite (names the parameter)
    """
    lr = lr_at(cfg, epoch)
    for name, node in state.params.items():
        grad = node.grad if gradients is None else gradients.get(name)
        if grad is None:
            raise ValueError(f"no gradient for parameter '{name}'")
        if not np.isfinite(grad).all():
            raise ValueError(f"non-finite gradient in parameter '{name}'")
        theta = node.data
        velocity = cfg.momentum * state.momentum[name] + grad + cfg.weight_decay * theta
        state.momentum[name] = velocity
        node.set_value(Grid.wrap(theta - lr * velocity))
    return state
