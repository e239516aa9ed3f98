"""Convolution kernels: centered kh x kw weights plus a per-output-channel bias."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from autodiff.grid import Grid
from autodiff.node import Node


@dataclass
class Kernel:
    """
    Weights are stored as a Grid of shape (kh, kw, in_channels * out_channels),
    channel-major in (in, out) order; bias as a Grid of shape (1, 1, out_channels).
    """

    weight: Node
    bias: Node
    in_channels: int
    out_channels: int

    def __post_init__(self) -> None:
        kh, kw, stacked = self.weight.shape
        if kh % 2 == 0 or kw % 2 == 0:
            raise ValueError(f"kernel extents must be odd, got {kh}x{kw}")
        if stacked != self.in_channels * self.out_channels:
            raise ValueError(
                f"weight channels {stacked} != {self.in_channels} in x {self.out_channels} out"
            )
        if self.bias.shape != (1, 1, self.out_channels):
            raise ValueError(f"bias shape {self.bias.shape} != (1, 1, {self.out_channels})")

    @classmethod
    def create(
        cls,
        weights: np.ndarray,
        bias: np.ndarray | None = None,
        trainable: bool = True,
        name: str = "kernel",
    ) -> Kernel:
        """Build from a (kh, kw, in, out) weight array."""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim != 4:
            raise ValueError(f"weights need shape (kh, kw, in, out), got {weights.shape}")
        kh, kw, cin, cout = weights.shape
        if bias is None:
            bias = np.zeros(cout)
        bias = np.asarray(bias, dtype=np.float64).reshape(1, 1, cout)
        make = Node.leaf if trainable else Node.constant
        return cls(
            weight=make(Grid(weights.reshape(kh, kw, cin * cout)), name=f"{name}.weight"),
            bias=make(Grid(bias), name=f"{name}.bias"),
            in_channels=cin,
            out_channels=cout,
        )

    @classmethod
    def zeros(cls, kh: int, kw: int, in_channels: int, out_channels: int, name: str = "kernel") -> Kernel:
        return cls.create(np.zeros((kh, kw, in_channels, out_channels)), name=name)

    @classmethod
    def box(cls, k: int) -> Kernel:
        """Constant single-channel k x k all-ones kernel (patch sums)."""
        return cls.create(np.ones((k, k, 1, 1)), trainable=False, name=f"box{k}")

    @property
    def kh(self) -> int:
        return self.weight.shape[0]

    @property
    def kw(self) -> int:
        return self.weight.shape[1]

    def weight_array(self) -> np.ndarray:
        """Weights as a (kh, kw, in, out) view."""
        return self.weight.data.reshape(self.kh, self.kw, self.in_channels, self.out_channels)

    def parameters(self) -> list[Node]:
        return [self.weight, self.bias]
