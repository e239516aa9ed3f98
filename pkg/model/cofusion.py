"""
Side-output fusion: the context-aware CoFusion block and the fixed
per-side weighted average it is compared against.

Side maps are pre-sigmoid logits. Fusion happens in logit space and the
caller applies the final sigmoid.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from autodiff import Kernel, Node, ops

DEFAULT_MID_CHANNELS = 32


@dataclass
class SidePack:
    """Ordered side logits Z_1..Z_L, all H x W x 1."""

    sides: list[Node]

    def __post_init__(self) -> None:
        if not self.sides:
            raise ValueError("SidePack needs at least one side map")
        h, w, _ = self.sides[0].shape
        for i, side in enumerate(self.sides, start=1):
            if side.shape != (h, w, 1):
                raise ValueError(f"side {i} has shape {side.shape}, expected {(h, w, 1)}")

    @property
    def count(self) -> int:
        return len(self.sides)

    @property
    def height(self) -> int:
        return self.sides[0].shape[0]

    @property
    def width(self) -> int:
        return self.sides[0].shape[1]

    def stacked(self) -> Node:
        """Z as one H x W x L node."""
        if self.count == 1:
            return self.sides[0]
        return ops.concat_channels(self.sides)


@dataclass
class CoFusionParams:
    """Three 3x3 attention convolutions: L -> mid -> mid -> L."""

    conv1: Kernel
    conv2: Kernel
    conv3: Kernel

    def __post_init__(self) -> None:
        sides = self.conv1.in_channels
        mid = self.conv1.out_channels
        if (self.conv2.in_channels, self.conv2.out_channels) != (mid, mid):
            raise ValueError(f"conv2 must map {mid} -> {mid} channels")
        if (self.conv3.in_channels, self.conv3.out_channels) != (mid, sides):
            raise ValueError(f"conv3 must map {mid} -> {sides} channels")
        for k in (self.conv1, self.conv2, self.conv3):
            if (k.kh, k.kw) != (3, 3):
                raise ValueError(f"attention kernels are 3x3, got {k.kh}x{k.kw}")

    @property
    def sides(self) -> int:
        return self.conv1.in_channels

    @property
    def mid_channels(self) -> int:
        return self.conv1.out_channels

    @classmethod
    def zeros(cls, sides: int, mid_channels: int = DEFAULT_MID_CHANNELS) -> CoFusionParams:
        return cls(
            conv1=Kernel.zeros(3, 3, sides, mid_channels, name="fusion.conv1"),
            conv2=Kernel.zeros(3, 3, mid_channels, mid_channels, name="fusion.conv2"),
            conv3=Kernel.zeros(3, 3, mid_channels, sides, name="fusion.conv3"),
        )

    def parameters(self) -> list[Node]:
        return [*self.conv1.parameters(), *self.conv2.parameters(), *self.conv3.parameters()]


def attention_scores(pack: SidePack, params: CoFusionParams) -> Node:
    """A_score = conv3(relu(conv2(relu(conv1(Z)))))."""
    if params.sides != pack.count:
        raise ValueError(f"fusion parameters expect {params.sides} sides, pack has {pack.count}")
    hidden = ops.relu(ops.conv2d(pack.stacked(), params.conv1))
    hidden = ops.relu(ops.conv2d(hidden, params.conv2))
    return ops.conv2d(hidden, params.conv3)


def cofusion_forward(pack: SidePack, params: CoFusionParams) -> tuple[Node, Node]:
    """
    Fuse side logits with per-pixel softmax weights.

    Returns:
        (final_logit H x W x 1, weights H x W x L)
    """
    weights = ops.channel_softmax(attention_scores(pack, params))
    fused = ops.channel_sum(ops.multiply(weights, pack.stacked()))
    return fused, weights


def fixed_weight_fusion(pack: SidePack, w: Sequence[float] | Node) -> Node:
    """
    Image-level weighted sum of side logits, one scalar per side.

    Args:
        pack: Side logits
        w: L floats, or a (1, 1, L) node when the weights are trained
    """
    if isinstance(w, Node):
        if w.shape != (1, 1, pack.count):
            raise ValueError(f"fusion weight shape {w.shape} != (1, 1, {pack.count})")
        weight = w
    else:
        values = np.asarray(list(w), dtype=np.float64)
        if values.shape != (pack.count,):
            raise ValueError(f"got {values.size} fusion weights for {pack.count} sides")
        weight = Node.constant(values.reshape(1, 1, -1))
    tiled = ops.broadcast_pixels(weight, pack.height, pack.width)
    return ops.channel_sum(ops.multiply(tiled, pack.stacked()))


# =============================================================================
# Fusion strategies used by the edge network
# =============================================================================


class Fusion(ABC):
    """Turns a SidePack into the fused logit."""

    mode: str = ""

    @abstractmethod
    def fuse(self, pack: SidePack) -> tuple[Node, Node | None]:
        """Return (final_logit, per-pixel weights or None)."""

    @abstractmethod
    def parameters(self) -> list[Node]:
        pass


class FixedFusion(Fusion):
    """HED-style learned scalar per side."""

    mode = "fixed"

    def __init__(self, weight: Node):
        self.weight = weight

    def fuse(self, pack: SidePack) -> tuple[Node, Node | None]:
        return fixed_weight_fusion(pack, self.weight), None

    def parameters(self) -> list[Node]:
        return [self.weight]


class CoFusion(Fusion):
    mode = "cofusion"

    def __init__(self, params: CoFusionParams):
        self.params = params

    def fuse(self, pack: SidePack) -> tuple[Node, Node | None]:
        return cofusion_forward(pack, self.params)

    def parameters(self) -> list[Node]:
        return self.params.parameters()


FUSION_MODES: dict[str, type[Fusion]] = {
    FixedFusion.mode: FixedFusion,
    CoFusion.mode: CoFusion,
}
