"""
JSON run-config loading, dot-path access, and atomic file writes.

Every file the tool produces (manifests, CSV traces, model files) goes
through the atomic writers so an interrupted run never leaves a truncated
file behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Invalid configuration: unknown key, bad type, out of range, or unsatisfiable."""


def load_config(config_path: str | Path) -> dict:
    """
    Load a JSON config document.

    Raises:
        FileNotFoundError: path does not exist
        ConfigError: file is not a JSON object
    """
    path = Path(config_path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path) as f:
        try:
            config = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from None
    if not isinstance(config, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config


def set_nested(d: dict, key_path: str, value: Any) -> None:
    """
    Set a nested dict value using dot notation.

    Example:
        set_nested(config, "train.lr0", 1e-3)
        # Sets config["train"]["lr0"] = 1e-3
    """
    keys = key_path.split(".")
    for key in keys[:-1]:
        if key not in d:
            d[key] = {}
        d = d[key]
    d[keys[-1]] = value


def parse_override(text: str) -> tuple[str, Any]:
    """
    Parse a `section.key=value` override. The value is read as JSON when
    possible (numbers, true/false, quoted strings) and as a bare string
    otherwise.
    """
    key_path, sep, raw = text.partition("=")
    if not sep or "." not in key_path:
        raise ConfigError(f"override must look like section.key=value, got '{text}'")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key_path.strip(), value


def apply_overrides(config: dict, overrides: list[str]) -> dict:
    for text in overrides:
        key_path, value = parse_override(text)
        set_nested(config, key_path, value)
    return config


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = None
    try:
        with tempfile.NamedTemporaryFile(dir=path.parent, suffix=".tmp", delete=False) as tmp:
            tmp.write(data)
            tmp_path = tmp.name
        os.replace(tmp_path, path)
    except OSError:
        if tmp_path is not None:
            try:
                os.unlink(tmp_path)
            except OSError:
                pass
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str | Path, obj: Any) -> None:
    atomic_write_text(path, json.dumps(obj, indent=4, sort_keys=True) + "\n")
