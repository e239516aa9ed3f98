"""
Shared utilities: JSON run configs, dot-path overrides, atomic writes and
the parameter tables that validate each config section.
"""

from .config import (
    ConfigError,
    apply_overrides,
    atomic_write_bytes,
    atomic_write_text,
    load_config,
    set_nested,
    write_json,
)
from .params import SECTIONS, ParamDef, render_defaults, validate_config, validate_section

__all__ = [
    # Config files
    "ConfigError",
    "load_config",
    "apply_overrides",
    "set_nested",
    # Atomic writes
    "atomic_write_bytes",
    "atomic_write_text",
    "write_json",
    # Parameter tables
    "SECTIONS",
    "ParamDef",
    "render_defaults",
    "validate_config",
    "validate_section",
]
