"""
Central finite-difference checks of analytic gradients.

The error of one entry is |a - n| / max(|a| + |n|, floor), where a and n
are its analytic and numeric derivatives. The floor is a fixed fraction of
the largest |a| + |n| over every checked entry of every input, so entries
that are numerically zero are judged against the check's gradient scale
instead of their own rounding noise. A check's error is the maximum over
every checked entry.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from autodiff.grid import Grid
from autodiff.node import Node, backward, topological_order

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-4
DEFAULT_TOLERANCE = 1e-5
DEFAULT_FLOOR_RATIO = 1e-3
ABSOLUTE_FLOOR = 1e-12

# Ops whose local derivative jumps when an input crosses a switch point
KINK_OPS = ("relu", "clamp", "maxpool2")


@dataclass
class GradCheckResult:
    """Outcome of one finite-difference check."""

    name: str
    max_rel_error: float
    checked: int
    skipped: int
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_rel_error < self.tolerance


def kink_signature(root: Node) -> str:
    """
    Digest of every switch decision in the graph: the value of relu and
    clamp outputs' active sets and the winning slot of each pooling window.
    Two evaluations with equal signatures lie on the same smooth piece.
    """
    digest = hashlib.sha1()
    for node in topological_order(root):
        if node.name not in KINK_OPS or not node.parents:
            continue
        if node.name == "maxpool2":
            x = node.parents[0][0].data
            h, w, c = x.shape
            padded = np.pad(x, ((0, h % 2), (0, w % 2), (0, 0)), mode="edge")
            hp, wp = padded.shape[:2]
            windows = padded.reshape(hp // 2, 2, wp // 2, 2, c).transpose(0, 2, 4, 1, 3)
            pattern = windows.reshape(hp // 2, wp // 2, c, 4).argmax(axis=3).astype(np.int8)
        elif node.name == "relu":
            pattern = node.data > 0.0
        else:
            pattern = node.parents[0][0].data == node.data
        digest.update(node.name.encode())
        digest.update(np.ascontiguousarray(pattern).tobytes())
    return digest.hexdigest()


def _perturbed(original: Grid, flat_index: int, delta: float) -> Grid:
    arr = original.to_array()
    arr.reshape(-1)[flat_index] += delta
    return Grid.wrap(arr)


def check_gradients(
    name: str,
    fn: Callable[[], Node],
    inputs: Sequence[Node],
    step: float = DEFAULT_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
    allow_kinks: bool = False,
    floor_ratio: float = DEFAULT_FLOOR_RATIO,
) -> GradCheckResult:
    """
    Compare backward() against central differences for every input leaf.

    Args:
        name: Label for reports
        fn: Builds a fresh scalar graph from the inputs' current values
        inputs: Leaf nodes to differentiate with respect to
        step: Finite-difference step h
        tolerance: Pass threshold on the relative error
        max_entries: Check at most this many entries per input (random subset)
        rng: Generator for the subset choice
        allow_kinks: Skip entries whose +h or -h evaluation switches a relu,
            clamp or pooling decision relative to the unperturbed graph
        floor_ratio: Denominator floor as a fraction of the largest
            |analytic| + |numeric|

    Returns:
        GradCheckResult with the worst per-entry relative error
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    for node in inputs:
        node.zero_grad()
    root = fn()
    baseline = kink_signature(root) if allow_kinks else ""
    backward(root)
    analytic_all = [node.grad.copy() for node in inputs]

    kept_analytic: list[float] = []
    kept_numeric: list[float] = []
    skipped = 0
    for node, analytic in zip(inputs, analytic_all):
        original = node.value
        size = original.size
        indices = np.arange(size)
        if max_entries is not None and size > max_entries:
            indices = np.sort(rng.choice(size, size=max_entries, replace=False))

        for i in indices:
            node.set_value(_perturbed(original, i, step))
            plus = fn()
            node.set_value(_perturbed(original, i, -step))
            minus = fn()
            node.set_value(original)

            if allow_kinks and (
                kink_signature(plus) != baseline or kink_signature(minus) != baseline
            ):
                skipped += 1
                continue
            kept_analytic.append(float(analytic.reshape(-1)[i]))
            kept_numeric.append((plus.item() - minus.item()) / (2.0 * step))

    worst = 0.0
    if kept_analytic:
        a = np.asarray(kept_analytic)
        n = np.asarray(kept_numeric)
        magnitude = np.abs(a) + np.abs(n)
        floor = max(floor_ratio * float(magnitude.max()), ABSOLUTE_FLOOR)
        worst = float((np.abs(a - n) / np.maximum(magnitude, floor)).max())

    checked = len(kept_analytic)
    result = GradCheckResult(
        name=name, max_rel_error=worst, checked=checked, skipped=skipped, tolerance=tolerance
    )
    logger.debug(
        f"gradcheck {name}: rel_error={worst:.3e} checked={checked} skipped={skipped}"
    )
    return result
