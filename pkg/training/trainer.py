"""
Training loop: forward, deeply supervised loss, backward, SGD step.

Batch gradients are the sum of per-sample gradients. The sample order of
epoch e is a pure function of (seed, e), so a run resumed from a
checkpoint reproduces the loss trace of an uninterrupted one.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from autodiff import Grid, backward
from losses import EdgeLabel
from model.edgenet import EdgeNetConfig, forward, loss_terms
from model.state import ModelState, init_params, save_state
from training.sgd import TrainConfig, lr_at, sgd_step
from utils.config import atomic_write_text

logger = logging.getLogger(__name__)
train_logger = logging.getLogger("train_debug")

LOSS_CSV_COLUMNS = ("epoch", "mean_total", "mean_ce", "mean_bdry", "mean_tex")


@dataclass(frozen=True)
class TrainingSample:
    image: Grid
    label: EdgeLabel
    name: str = ""

    def flipped(self) -> TrainingSample:
        return TrainingSample(
            image=Grid(self.image.data[:, ::-1, :]),
            label=self.label.flipped(),
            name=f"{self.name}:flip",
        )


@dataclass
class EpochRecord:
    """Per-epoch means of the weighted loss components (epoch is 1-based)."""

    epoch: int
    mean_total: float
    mean_ce: float
    mean_bdry: float
    mean_tex: float

    def row(self) -> list:
        return [self.epoch, self.mean_total, self.mean_ce, self.mean_bdry, self.mean_tex]


@dataclass
class TrainResult:
    state: ModelState
    history: list[EpochRecord] = field(default_factory=list)


def supervised_samples(samples: Iterable[TrainingSample]) -> list[TrainingSample]:
    """Drop samples whose label has neither positives nor negatives."""
    kept = []
    for sample in samples:
        if sample.label.supervised:
            kept.append(sample)
        else:
            logger.warning(f"Skipping sample '{sample.name}': label has no positive or negative pixels")
    return kept


def epoch_order(seed: int, epoch: int, count: int) -> np.ndarray:
    """Shuffled sample indices for one epoch."""
    return np.random.default_rng([seed, epoch]).permutation(count)


def train(
    samples: Sequence[TrainingSample],
    net_cfg: EdgeNetConfig,
    train_cfg: TrainConfig,
    state: ModelState | None = None,
    checkpoint_dir: str | Path | None = None,
) -> TrainResult:
    """
    Train from `state` (or a fresh init at train_cfg.seed) until
    train_cfg.epochs epochs are complete.

    Args:
        samples: Training set
        net_cfg: Architecture and per-level loss settings
        train_cfg: Optimizer, schedule and seed
        state: Starting point, e.g. a loaded checkpoint; epochs it already
            records are not repeated
        checkpoint_dir: Where checkpoint_every writes checkpoint_NNNN.model

    Returns:
        TrainResult with the final state and the records of the epochs run

    Raises:
        ValueError: empty dataset, or no sample carries supervision
    """
    if not samples:
        raise ValueError("training set is empty")
    if state is None:
        state = init_params(net_cfg, train_cfg.seed)
    usable = supervised_samples(samples)
    if not usable:
        raise ValueError("no training sample has positive or negative pixels")
    flipped = [s.flipped() for s in usable] if train_cfg.flip_augment else []

    result = TrainResult(state=state)
    if state.epoch >= train_cfg.epochs:
        logger.info(f"Model already at epoch {state.epoch}; nothing to train")
        return result

    logger.info(
        f"Training {len(usable)} samples{' (+flips)' if flipped else ''}, "
        f"epochs {state.epoch + 1}..{train_cfg.epochs}, fusion={net_cfg.fusion_mode}"
    )
    for epoch in range(state.epoch, train_cfg.epochs):
        presented: list[TrainingSample] = []
        for i in epoch_order(train_cfg.seed, epoch, len(usable)):
            presented.append(usable[i])
            if flipped:
                presented.append(flipped[i])

        sums = np.zeros(4)
        lr = lr_at(train_cfg, epoch)
        for start in range(0, len(presented), train_cfg.batch_size):
            batch = presented[start : start + train_cfg.batch_size]
            state.zero_grad()
            batch_sums = np.zeros(4)
            for sample in batch:
                pack, final_logit = forward(sample.image, state, net_cfg)
                terms = loss_terms(pack, final_logit, sample.label, net_cfg)
                backward(terms.total)
                batch_sums += (terms.total.item(), terms.ce, terms.bdry, terms.tex)
            sgd_step(state, None, train_cfg, epoch)
            sums += batch_sums
            train_logger.debug(
                f"epoch={epoch + 1} batch={start // train_cfg.batch_size + 1} lr={lr:.3g} "
                f"total={batch_sums[0]:.6f} ce={batch_sums[1]:.6f} "
                f"bdry={batch_sums[2]:.6f} tex={batch_sums[3]:.6f}"
            )

        state.epoch = epoch + 1
        means = sums / len(presented)
        record = EpochRecord(state.epoch, *(float(m) for m in means))
        result.history.append(record)
        logger.info(
            f"Epoch {record.epoch}/{train_cfg.epochs}: loss={record.mean_total:.4f} "
            f"(ce={record.mean_ce:.4f} bdry={record.mean_bdry:.4f} tex={record.mean_tex:.4f}) lr={lr:.3g}"
        )

        if checkpoint_dir and train_cfg.checkpoint_every and state.epoch % train_cfg.checkpoint_every == 0:
            save_state(state, Path(checkpoint_dir) / f"checkpoint_{state.epoch:04d}.model")

    return result


# =============================================================================
# Loss trace CSV
# =============================================================================


def format_loss_csv(records: Sequence[EpochRecord]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(LOSS_CSV_COLUMNS)
    for record in records:
        writer.writerow(record.row())
    return out.getvalue()


def write_loss_csv(path: str | Path, records: Sequence[EpochRecord]) -> None:
    atomic_write_text(path, format_loss_csv(records))
    logger.info(f"Wrote loss trace ({len(records)} epochs) to {path}")


def read_loss_csv(path: str | Path) -> list[EpochRecord]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != LOSS_CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [
            EpochRecord(
                epoch=int(row["epoch"]),
                mean_total=float(row["mean_total"]),
                mean_ce=float(row["mean_ce"]),
                mean_bdry=float(row["mean_bdry"]),
                mean_tex=float(row["mean_tex"]),
            )
            for row in reader
        ]
