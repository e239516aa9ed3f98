"""Command-line entry point: gen, train, predict, eval, gradcheck, ablate."""

from .run_config import RunConfig, build_run_config

__all__ = ["RunConfig", "build_run_config"]
