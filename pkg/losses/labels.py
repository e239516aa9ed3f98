"""Edge labels: consensus grids split into positive, negative and excluded sets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from autodiff import Grid


@dataclass(frozen=True, eq=False)
class EdgeLabel:
    """
    Supervision derived from an annotator-consensus grid.

    positive (Y+): y > delta. negative (Y-): y == 0. excluded: 0 < y <= delta.
    The edge set E is the positive set; buffer (E-hat) is E dilated by a
    k_bdry x k_bdry box, clipped at the borders.
    """

    consensus: Grid
    delta: float
    k_bdry: int
    positive_mask: np.ndarray = field(repr=False)
    negative_mask: np.ndarray = field(repr=False)
    excluded_mask: np.ndarray = field(repr=False)
    buffer_mask: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.positive_mask.shape

    @property
    def edge_set(self) -> list[tuple[int, int]]:
        """Edge pixel coordinates in row-major order."""
        return [(int(r), int(c)) for r, c in np.argwhere(self.positive_mask)]

    @property
    def num_positive(self) -> int:
        return int(self.positive_mask.sum())

    @property
    def num_negative(self) -> int:
        return int(self.negative_mask.sum())

    @property
    def supervised(self) -> bool:
        """True when Y+ and Y- are not both empty (alpha is defined)."""
        return self.num_positive + self.num_negative > 0

    @property
    def alpha(self) -> float:
        """Fraction of negatives among supervised pixels: |Y-| / (|Y+| + |Y-|)."""
        total = self.num_positive + self.num_negative
        if total == 0:
            raise ValueError("alpha undefined: label has no positive or negative pixels")
        return self.num_negative / total

    def flipped(self) -> EdgeLabel:
        """The same label mirrored left-right."""
        return derive_label(Grid(self.consensus.data[:, ::-1, :]), self.delta, self.k_bdry)


def derive_label(consensus: Grid, delta: float, k_bdry: int = 7) -> EdgeLabel:
    """
    Split a consensus grid into Y+, Y-, the excluded band, and the buffer zone.

    Args:
        consensus: Single-channel grid with values in [0, 1]
        delta: Controversy threshold in [0, 1)
        k_bdry: Odd box size used for the boundary tracing patches

    Raises:
        ValueError: delta out of [0, 1), even k_bdry, or values outside [0, 1]
    """
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if k_bdry < 1 or k_bdry % 2 == 0:
        raise ValueError(f"k_bdry must be odd and positive, got {k_bdry}")
    if consensus.channels != 1:
        raise ValueError(f"consensus must be single-channel, got {consensus.channels}")
    y = consensus.plane()
    if y.min() < 0.0 or y.max() > 1.0:
        raise ValueError("consensus values must lie in [0, 1]")

    positive = y > delta
    negative = y == 0.0
    excluded = ~positive & ~negative
    if positive.any():
        buffer = ndimage.binary_dilation(positive, structure=np.ones((k_bdry, k_bdry), dtype=bool))
    else:
        buffer = np.zeros_like(positive)

    for m in (positive, negative, excluded, buffer):
        m.flags.writeable = False
    return EdgeLabel(
        consensus=consensus,
        delta=float(delta),
        k_bdry=int(k_bdry),
        positive_mask=positive,
        negative_mask=negative,
        excluded_mask=excluded,
        buffer_mask=buffer,
    )
