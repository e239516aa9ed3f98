"""
RunConfig: one JSON document resolved into the typed configs of every stage.

Sections map onto SynthSpec (synth), EdgeNetConfig (net), TrainConfig
(train), per-level TracingConfigs (loss) and EvalConfig (eval). When
`loss.preset` names a dataset preset it supplies delta, lam, the three
lambda1/lambda2 pairs and the train schedule; keys written explicitly in the
document win over the preset.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass
from typing import Any

from evaluation import EvalConfig
from losses import TracingConfig, get_preset
from losses.presets import low_group_size
from model.edgenet import EdgeNetConfig
from synth import SynthSpec
from training import TrainConfig
from utils.config import ConfigError, apply_overrides, set_nested
from utils.params import validate_config

logger = logging.getLogger(__name__)

LEVEL_GROUPS = ("low", "high", "final")


@dataclass
class RunConfig:
    synth: SynthSpec
    net: EdgeNetConfig
    train: TrainConfig
    eval: EvalConfig
    delta: float
    k_bdry: int
    sections: dict[str, dict[str, Any]]


def _explicit(raw: dict, section: str) -> set[str]:
    values = raw.get(section)
    return set(values) if isinstance(values, dict) else set()


def _apply_preset(raw: dict, sections: dict[str, dict[str, Any]]) -> None:
    """Fill preset values into keys the document leaves unset."""
    loss = sections["loss"]
    if not loss["preset"]:
        return
    preset = get_preset(loss["preset"])
    given = _explicit(raw, "loss")
    values = {"delta": preset.delta, "lam": preset.lam}
    for group in LEVEL_GROUPS:
        l1, l2 = getattr(preset, group)
        values[f"{group}_lambda1"] = l1
        values[f"{group}_lambda2"] = l2
    for key, value in values.items():
        if key not in given:
            loss[key] = value

    given_train = _explicit(raw, "train")
    for key in ("lr_drop_period", "epochs"):
        if key not in given_train:
            sections["train"][key] = getattr(preset, key)
    logger.debug(f"loss preset '{preset.name}' applied")


def level_configs(loss: dict[str, Any], stages: int) -> tuple[dict[int, TracingConfig], TracingConfig]:
    """
    Per-stage and fused-map TracingConfigs from a resolved loss section.

    `mode: ce` zeroes every lambda; `bdry: false` zeroes lambda1 and
    `tex: false` zeroes lambda2.
    """
    n_low = loss["low_stages"] or low_group_size(stages)
    if n_low > stages:
        raise ConfigError(f"loss.low_stages={n_low} exceeds net.stages={stages}")
    use_bdry = loss["mode"] == "tracing" and loss["bdry"]
    use_tex = loss["mode"] == "tracing" and loss["tex"]

    def make(group: str) -> TracingConfig:
        return TracingConfig(
            lam=loss["lam"],
            lambda1=loss[f"{group}_lambda1"] if use_bdry else 0.0,
            lambda2=loss[f"{group}_lambda2"] if use_tex else 0.0,
            k_bdry=loss["k_bdry"],
            k_tex=loss["k_tex"],
            epsilon=loss["epsilon"],
        )

    levels = {s: make("low" if s <= n_low else "high") for s in range(1, stages + 1)}
    return levels, make("final")


def build_run_config(raw: dict | None = None, overrides: list[str] | None = None) -> RunConfig:
    """
    Validate a config document and build the typed configs.

    Args:
        raw: Parsed JSON document (None = all defaults)
        overrides: `section.key=value` strings applied before validation

    Raises:
        ConfigError: unknown keys, bad values, or settings that cannot be met
    """
    raw = copy.deepcopy(raw) if raw else {}
    if overrides:
        apply_overrides(raw, overrides)
    sections = validate_config(raw)
    _apply_preset(raw, sections)

    try:
        synth = SynthSpec(**sections["synth"])
        synth.validate()
        levels, final = level_configs(sections["loss"], sections["net"]["stages"])
        net = EdgeNetConfig(**sections["net"], level_groups=levels, final_loss=final)
        train = TrainConfig(**sections["train"])
        evaluation = EvalConfig(**sections["eval"])
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from None

    return RunConfig(
        synth=synth,
        net=net,
        train=train,
        eval=evaluation,
        delta=sections["loss"]["delta"],
        k_bdry=sections["loss"]["k_bdry"],
        sections=sections,
    )


def with_overrides(raw: dict | None, values: dict[str, Any]) -> dict:
    """Copy of `raw` with dot-path keys set (None values are skipped)."""
    out = copy.deepcopy(raw) if raw else {}
    for key_path, value in values.items():
        if value is not None:
            set_nested(out, key_path, value)
    return out
