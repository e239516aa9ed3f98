"""Dense H x W x C grids of 64-bit reals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Grid:
    """
    Immutable row-major grid of float64 values with shape (height, width, channels).

    2-D input is promoted to a single channel. Every Grid is finite; building
    one from NaN/Inf data raises FloatingPointError.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"Grid needs 2-D or 3-D data, got shape {arr.shape}")
        _check_finite(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def wrap(cls, arr: np.ndarray) -> Grid:
        """Adopt a freshly computed (H, W, C) float64 array without copying."""
        if arr.ndim != 3:
            raise ValueError(f"Grid needs 3-D data, got shape {arr.shape}")
        if arr.dtype != np.float64:
            arr = arr.astype(np.float64)
        _check_finite(arr)
        arr.flags.writeable = False
        grid = object.__new__(cls)
        object.__setattr__(grid, "data", arr)
        return grid

    @classmethod
    def zeros(cls, height: int, width: int, channels: int = 1) -> Grid:
        return cls.wrap(np.zeros((height, width, channels)))

    @classmethod
    def full(cls, height: int, width: int, value: float, channels: int = 1) -> Grid:
        return cls.wrap(np.full((height, width, channels), float(value)))

    @classmethod
    def scalar(cls, value: float) -> Grid:
        return cls.wrap(np.full((1, 1, 1), float(value)))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def plane(self, channel: int = 0) -> np.ndarray:
        """Read-only 2-D view of one channel."""
        return self.data[:, :, channel]

    def item(self) -> float:
        if self.size != 1:
            raise ValueError(f"item() needs a 1-element grid, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def to_array(self) -> np.ndarray:
        """Writable copy of the payload."""
        return self.data.copy()


def _check_finite(arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        bad = int(np.count_nonzero(~np.isfinite(arr)))
        raise FloatingPointError(f"grid of shape {arr.shape} has {bad} non-finite values")
