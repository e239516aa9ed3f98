"""
Boundary benchmark: threshold sweep, correspondence counting, PR curve,
ODS and OIS.

Conventions:
    thresholds  i / (n + 1) for i = 1..n (n = 99 gives 0.01..0.99)
    binarize    pred >= t
    P           1 when nothing is predicted (TP + FP = 0)
    R           1 when the ground truth is empty (TP + FN = 0)
    F           2PR / (P + R), 0 when P + R = 0
    ties        the lower threshold wins, for ODS and for each image's OIS pick
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from autodiff import Grid
from evaluation.matching import correspond
from evaluation.postprocess import postprocess
from losses import EdgeLabel
from utils.config import atomic_write_text

logger = logging.getLogger(__name__)

PROTOCOLS = ("standard", "crisp")
PR_CSV_COLUMNS = ("threshold", "TP", "FP", "FN", "P", "R", "F")


@dataclass
class EvalConfig:
    tolerance: float = 0.0075
    thresholds: int = 99
    protocol: str = "standard"
    nms_sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if self.thresholds < 1:
            raise ValueError(f"thresholds must be >= 1, got {self.thresholds}")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}, got '{self.protocol}'")

    def threshold_values(self) -> np.ndarray:
        n = self.thresholds
        return np.arange(1, n + 1) / (n + 1)


@dataclass
class Score:
    precision: float
    recall: float
    f: float
    threshold: float | None = None


@dataclass
class EvalResult:
    thresholds: np.ndarray  # (T,)
    counts: np.ndarray  # (T, 3) dataset TP, FP, FN
    per_image: np.ndarray  # (N, T, 3)
    precision: np.ndarray  # (T,)
    recall: np.ndarray
    f: np.ndarray
    ods: Score
    ois: Score
    best_thresholds: np.ndarray  # (N,) each image's OIS threshold


def match_radius(height: int, width: int, tolerance: float) -> int:
    """round-half-up(tolerance * diagonal), at least 1 px."""
    return max(1, math.floor(tolerance * math.hypot(height, width) + 0.5))


def prf(tp: np.ndarray, fp: np.ndarray, fn: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized precision, recall, F with the empty-set conventions."""
    tp, fp, fn = (np.asarray(a, dtype=np.float64) for a in (tp, fp, fn))
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(tp + fp > 0, tp / (tp + fp), 1.0)
        r = np.where(tp + fn > 0, tp / (tp + fn), 1.0)
        f = np.where(p + r > 0, 2 * p * r / (p + r), 0.0)
    return p, r, f


def image_counts(values: np.ndarray, gt: np.ndarray, thresholds: np.ndarray, radius: int) -> np.ndarray:
    """(T, 3) TP/FP/FN of one map across the sweep."""
    out = np.zeros((len(thresholds), 3), dtype=np.int64)
    for i, t in enumerate(thresholds):
        c = correspond(values >= t, gt, radius)
        out[i] = (c.tp, c.fp, c.fn)
    return out


def _evaluate_one(args: tuple[np.ndarray, np.ndarray, EvalConfig]) -> np.ndarray:
    values, gt, cfg = args
    if cfg.protocol == "standard":
        values = postprocess(Grid(values), cfg.nms_sigma).plane()
    radius = match_radius(*gt.shape, cfg.tolerance)
    return image_counts(values, gt, cfg.threshold_values(), radius)


def summarize(per_image: np.ndarray, thresholds: np.ndarray) -> EvalResult:
    """
    ODS/OIS from per-image counts.

    Args:
        per_image: (N, T, 3) TP/FP/FN per image and threshold
        thresholds: (T,) ascending
    """
    per_image = np.asarray(per_image, dtype=np.int64)
    if per_image.ndim != 3 or per_image.shape[0] == 0:
        raise ValueError("summarize needs counts for at least one image")
    counts = per_image.sum(axis=0)
    p, r, f = prf(counts[:, 0], counts[:, 1], counts[:, 2])
    best = int(np.argmax(f))  # first maximum = lowest threshold
    ods = Score(float(p[best]), float(r[best]), float(f[best]), float(thresholds[best]))

    _, _, f_img = prf(per_image[..., 0], per_image[..., 1], per_image[..., 2])
    picks = np.argmax(f_img, axis=1)
    chosen = per_image[np.arange(per_image.shape[0]), picks].sum(axis=0)
    op, orr, of = prf(chosen[0], chosen[1], chosen[2])
    ois = Score(float(op), float(orr), float(of))

    return EvalResult(
        thresholds=np.asarray(thresholds, dtype=np.float64),
        counts=counts,
        per_image=per_image,
        precision=p,
        recall=r,
        f=f,
        ods=ods,
        ois=ois,
        best_thresholds=np.asarray(thresholds)[picks],
    )


def evaluate(
    predictions: Sequence[Grid],
    labels: Sequence[EdgeLabel],
    cfg: EvalConfig,
    jobs: int = 1,
) -> EvalResult:
    """
    Score predictions against the positive sets of their labels.

    Args:
        predictions: Single-channel maps in [0, 1]
        labels: Matching labels; ground truth is each label's Y+
        cfg: Tolerance, sweep and protocol
        jobs: Worker processes; results are reduced in image order

    Raises:
        ValueError: empty dataset, length mismatch or shape mismatch
    """
    if not predictions:
        raise ValueError("cannot evaluate an empty dataset")
    if len(predictions) != len(labels):
        raise ValueError(f"{len(predictions)} predictions for {len(labels)} labels")
    tasks = []
    for i, (pred, label) in enumerate(zip(predictions, labels)):
        if (pred.height, pred.width) != label.shape:
            raise ValueError(f"image {i}: prediction {pred.shape[:2]} vs label {label.shape}")
        tasks.append((pred.plane().copy(), np.array(label.positive_mask), cfg))

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_image = list(pool.map(_evaluate_one, tasks))
    else:
        per_image = [_evaluate_one(t) for t in tasks]

    result = summarize(np.stack(per_image), cfg.threshold_values())
    logger.info(
        f"{cfg.protocol} protocol, {len(tasks)} images: ODS={result.ods.f:.4f} "
        f"(t={result.ods.threshold:.2f}) OIS={result.ois.f:.4f}"
    )
    return result


# =============================================================================
# Reports
# =============================================================================


def format_pr_csv(result: EvalResult) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(PR_CSV_COLUMNS)
    for i, t in enumerate(result.thresholds):
        tp, fp, fn = (int(v) for v in result.counts[i])
        writer.writerow(
            [f"{t:.4f}", tp, fp, fn, f"{result.precision[i]:.6f}", f"{result.recall[i]:.6f}", f"{result.f[i]:.6f}"]
        )
    ods, ois = result.ods, result.ois
    writer.writerow(["ODS", f"{ods.threshold:.4f}", "", "", f"{ods.precision:.6f}", f"{ods.recall:.6f}", f"{ods.f:.6f}"])
    writer.writerow(["OIS", "", "", "", f"{ois.precision:.6f}", f"{ois.recall:.6f}", f"{ois.f:.6f}"])
    return out.getvalue()


def write_pr_csv(path: str | Path, result: EvalResult) -> None:
    atomic_write_text(path, format_pr_csv(result))
    logger.info(f"Wrote PR curve to {path}")


@dataclass
class TrialSummary:
    ods_mean: float
    ods_std: float
    ois_mean: float
    ois_std: float
    trials: int


def summarize_trials(results: Sequence[EvalResult]) -> TrialSummary:
    """Mean and population standard deviation of ODS/OIS across runs."""
    if not results:
        raise ValueError("no trials to summarize")
    ods = np.array([r.ods.f for r in results])
    ois = np.array([r.ois.f for r in results])
    return TrialSummary(
        ods_mean=float(ods.mean()),
        ods_std=float(ods.std()),
        ois_mean=float(ois.mean()),
        ois_std=float(ois.std()),
        trials=len(results),
    )
