"""
Named tracing-loss settings for the four benchmark datasets.

Each preset carries the LR drop period and epoch budget, delta, the CE
balance lambda, and (lambda1, lambda2) for the low side group, the high
side group and the fused map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from losses.tracing import TracingConfig


@dataclass(frozen=True)
class LossPreset:
    name: str
    lr_drop_period: int
    epochs: int
    delta: float
    lam: float
    low: tuple[float, float]
    high: tuple[float, float]
    final: tuple[float, float]


PRESETS: dict[str, LossPreset] = {
    p.name: p
    for p in (
        LossPreset("nyudv2", 20, 60, 0.0, 1.2, (4.0, 0.05), (2.0, 0.1), (6.0, 0.05)),
        LossPreset("bsds500", 10, 40, 0.3, 1.1, (2.0, 0.05), (1.0, 0.1), (4.0, 0.05)),
        LossPreset("multicue_boundary", 20, 60, 0.3, 1.2, (2.0, 0.05), (1.0, 0.1), (4.0, 0.03)),
        LossPreset("multicue_edge", 20, 60, 0.2, 1.1, (4.0, 0.01), (2.0, 0.01), (6.0, 0.01)),
    )
}


def get_preset(name: str) -> LossPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown loss preset '{name}' (known: {', '.join(sorted(PRESETS))})") from None


def low_group_size(stages: int) -> int:
    """Stages 1..n form the low group, n = ceil(0.6 * stages)."""
    return math.ceil(0.6 * stages)


def level_groups_for(
    preset: LossPreset | str,
    stages: int,
    base: TracingConfig | None = None,
) -> tuple[dict[int, TracingConfig], TracingConfig]:
    """
    Expand a preset into per-stage configs plus the fused-map config.

    Args:
        preset: LossPreset or its name
        stages: Number of side outputs
        base: Supplies k_bdry, k_tex and epsilon (defaults otherwise)

    Returns:
        ({stage: TracingConfig} for stages 1..stages, final TracingConfig)
    """
    if isinstance(preset, str):
        preset = get_preset(preset)
    if stages < 1:
        raise ValueError(f"stages must be >= 1, got {stages}")
    base = base or TracingConfig()
    n_low = low_group_size(stages)

    def make(weights: tuple[float, float]) -> TracingConfig:
        return replace(base, lam=preset.lam, lambda1=weights[0], lambda2=weights[1])

    levels = {s: make(preset.low if s <= n_low else preset.high) for s in range(1, stages + 1)}
    return levels, make(preset.final)
