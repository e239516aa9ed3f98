"""Tracing loss: label derivation, the three loss terms, presets and a naive oracle."""

from .labels import EdgeLabel, derive_label
from .tracing import (
    LossTerms,
    TracingConfig,
    loss_bdry,
    loss_ce,
    loss_tex,
    tracing_loss,
    tracing_terms,
)
from .oracle import loss_oracle
from .presets import PRESETS, LossPreset, get_preset, level_groups_for

__all__ = [
    "EdgeLabel",
    "derive_label",
    "LossTerms",
    "TracingConfig",
    "loss_ce",
    "loss_bdry",
    "loss_tex",
    "tracing_loss",
    "tracing_terms",
    "loss_oracle",
    "PRESETS",
    "LossPreset",
    "get_preset",
    "level_groups_for",
]
