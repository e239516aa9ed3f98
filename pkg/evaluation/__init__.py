"""Boundary benchmark: post-processing, tolerance matching, ODS/OIS."""

from .bench import (
    EvalConfig,
    EvalResult,
    Score,
    TrialSummary,
    evaluate,
    format_pr_csv,
    match_radius,
    summarize,
    summarize_trials,
    write_pr_csv,
)
from .matching import Correspondence, correspond
from .postprocess import non_max_suppression, postprocess
from .thinning import thin

__all__ = [
    "EvalConfig",
    "EvalResult",
    "Score",
    "TrialSummary",
    "evaluate",
    "format_pr_csv",
    "match_radius",
    "summarize",
    "summarize_trials",
    "write_pr_csv",
    "Correspondence",
    "correspond",
    "non_max_suppression",
    "postprocess",
    "thin",
]
