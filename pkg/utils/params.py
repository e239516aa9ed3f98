"""
params.py - Table-driven validation of run-config sections

Every config section (synth, net, train, loss, eval) is described by a list
of ParamDef records. Validation fills defaults, rejects unknown keys,
coerces types and range-checks values. The same table renders the
documented defaults for --help.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

from utils.config import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class ParamDef:
    """Definition of one config key."""

    name: str
    default: int | float | str | bool
    value_type: type = int
    min_val: int | float | None = None
    max_val: int | float | None = None
    choices: tuple[str, ...] | None = None
    help: str = ""

    def coerce(self, section: str, value: Any) -> int | float | str | bool:
        """Type-check and range-check one value."""
        key = f"{section}.{self.name}"
        if self.value_type is bool:
            if not isinstance(value, bool):
                raise ConfigError(f"{key} must be true or false, got {value!r}")
            return value
        if self.value_type is int:
            if isinstance(value, bool) or not isinstance(value, int):
                if isinstance(value, float) and value.is_integer():
                    value = int(value)
                else:
                    raise ConfigError(f"{key} must be an integer, got {value!r}")
        elif self.value_type is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{key} must be a number, got {value!r}")
            value = float(value)
        elif self.value_type is str:
            if not isinstance(value, str):
                raise ConfigError(f"{key} must be a string, got {value!r}")
            if self.choices is not None and value not in self.choices:
                raise ConfigError(f"{key} must be one of {list(self.choices)}, got '{value}'")
            return value

        if self.min_val is not None and value < self.min_val:
            raise ConfigError(f"{key}={value} below min {self.min_val}")
        if self.max_val is not None and value > self.max_val:
            raise ConfigError(f"{key}={value} above max {self.max_val}")
        return value


# =============================================================================
# Section tables
# =============================================================================

SYNTH_PARAMS = [
    ParamDef("image_size", 64, int, 8, 4096, help="square image side in pixels"),
    ParamDef("num_images", 200, int, 1, 100000),
    ParamDef("min_shapes", 1, int, 1, 64),
    ParamDef("max_shapes", 4, int, 1, 64),
    ParamDef("max_amplitude", 0.4, float, 0.0, 0.4, help="texture amplitude ceiling"),
    ParamDef("min_period", 2, int, 2, 6),
    ParamDef("max_period", 6, int, 2, 6),
    ParamDef("annotators", 5, int, 1, 64),
    ParamDef("annotator_jitter", 1, int, 0, 8, help="max offset of an annotator's trace in px"),
    ParamDef("seed", 0, int, 0, 2**64 - 1),
]

NET_PARAMS = [
    ParamDef("stages", 3, int, 1, 8),
    ParamDef("convs_per_stage", 2, int, 1, 8),
    ParamDef("base_channels", 16, int, 1, 512),
    ParamDef("in_channels", 1, int, 1, 3),
    ParamDef("fusion_mode", "fixed", str, choices=("fixed", "cofusion")),
    ParamDef("mid_channels", 32, int, 1, 512, help="CoFusion hidden width"),
    ParamDef("init_sigma", 0.01, float, 0.0, 1.0, help="std of the Gaussian weight init"),
]

TRAIN_PARAMS = [
    ParamDef("lr0", 1e-6, float, 0.0, 10.0),
    ParamDef("momentum", 0.9, float, 0.0, 0.999999),
    ParamDef("weight_decay", 2e-4, float, 0.0, 1.0),
    ParamDef("batch_size", 10, int, 1, 10000),
    ParamDef("epochs", 60, int, 0, 100000),
    ParamDef("lr_drop_period", 20, int, 1, 100000),
    ParamDef("lr_drop_factor", 0.1, float, 1e-12, 1.0),
    ParamDef("seed", 0, int, 0, 2**64 - 1),
    ParamDef("flip_augment", False, bool, help="also present each sample mirrored"),
    ParamDef("checkpoint_every", 0, int, 0, 100000, help="epochs between checkpoints, 0 = off"),
]

LOSS_PARAMS = [
    ParamDef(
        "preset",
        "",
        str,
        choices=("", "nyudv2", "bsds500", "multicue_boundary", "multicue_edge"),
        help="dataset preset; explicit keys override it",
    ),
    ParamDef("mode", "tracing", str, choices=("tracing", "ce")),
    ParamDef("bdry", True, bool, help="include the boundary tracing term"),
    ParamDef("tex", True, bool, help="include the texture suppression term"),
    ParamDef("delta", 0.0, float, 0.0, 0.999999),
    ParamDef("lam", 1.1, float, 0.0, 100.0),
    ParamDef("k_bdry", 7, int, 1, 31),
    ParamDef("k_tex", 3, int, 1, 31),
    ParamDef("epsilon", 1e-10, float, 1e-300, 1e-3),
    ParamDef("low_stages", 0, int, 0, 8, help="stages in the low side group, 0 = ceil(0.6*stages)"),
    ParamDef("low_lambda1", 4.0, float, 0.0, 1000.0),
    ParamDef("low_lambda2", 0.05, float, 0.0, 1000.0),
    ParamDef("high_lambda1", 2.0, float, 0.0, 1000.0),
    ParamDef("high_lambda2", 0.1, float, 0.0, 1000.0),
    ParamDef("final_lambda1", 6.0, float, 0.0, 1000.0),
    ParamDef("final_lambda2", 0.05, float, 0.0, 1000.0),
]

EVAL_PARAMS = [
    ParamDef("tolerance", 0.0075, float, 1e-6, 1.0, help="match radius as a fraction of the diagonal"),
    ParamDef("thresholds", 99, int, 1, 10000),
    ParamDef("protocol", "standard", str, choices=("standard", "crisp")),
    ParamDef("nms_sigma", 1.0, float, 0.0, 10.0),
]

SECTIONS: dict[str, list[ParamDef]] = {
    "synth": SYNTH_PARAMS,
    "net": NET_PARAMS,
    "train": TRAIN_PARAMS,
    "loss": LOSS_PARAMS,
    "eval": EVAL_PARAMS,
}


def validate_section(section: str, values: dict[str, Any] | None) -> dict[str, Any]:
    """
    Validate one section against its table.

    Args:
        section: Section name
        values: Raw mapping from the JSON document (None = all defaults)

    Returns:
        Complete mapping with defaults for missing keys

    Raises:
        ConfigError: unknown section or key, bad type, or value out of range
    """
    if section not in SECTIONS:
        raise ConfigError(f"unknown config section '{section}'")
    values = values or {}
    if not isinstance(values, dict):
        raise ConfigError(f"section '{section}' must be a JSON object")
    table = {p.name: p for p in SECTIONS[section]}
    unknown = sorted(set(values) - set(table))
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(unknown)}")
    resolved = {}
    for name, p in table.items():
        resolved[name] = p.coerce(section, values[name]) if name in values else p.default
    logger.debug(f"config {section}: {resolved}")
    return resolved


def validate_config(config: dict[str, Any]) -> dict[str, dict[str, Any]]:
    """Validate a whole document; missing sections get their defaults."""
    unknown = sorted(set(config) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}")
    return {name: validate_section(name, config.get(name)) for name in SECTIONS}


def render_defaults(sections: list[str] | None = None) -> str:
    """Defaults table for --help epilogs."""
    lines = ["config keys (default):"]
    for section in sections or list(SECTIONS):
        lines.append(f"  [{section}]")
        for p in SECTIONS[section]:
            default = '""' if p.default == "" else p.default
            extra = f"  {p.help}" if p.help else ""
            if p.choices:
                shown = ", ".join(c or '""' for c in p.choices)
                extra += f"  {{{shown}}}"
            lines.append(f"    {p.name} = {default}{extra}")
    return "\n".join(lines)
