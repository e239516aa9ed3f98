"""
Miniature multi-stage side-output edge network.

Stage s (1-based) max-pools (s > 1), applies convs_per_stage 3x3 conv+ReLU
layers with base_channels * 2^(s-1) channels, and emits a 1x1-conv side
logit that is bilinearly upsampled by 2^(s-1) and cropped back to the input
size. Sides are fused by the configured Fusion.

Parameter names:
    stage{s}.conv{j}.weight / .bias
    stage{s}.head.weight / .bias
    fusion.weight                        (fixed mode)
    fusion.conv{1,2,3}.weight / .bias    (cofusion mode)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from autodiff import Grid, Node, ops
from losses import EdgeLabel, LossTerms, TracingConfig, tracing_terms
from model.cofusion import (
    DEFAULT_MID_CHANNELS,
    FUSION_MODES,
    CoFusion,
    CoFusionParams,
    FixedFusion,
    Fusion,
    SidePack,
)

if TYPE_CHECKING:
    from model.state import ModelState

ARCHITECTURE_KEYS = (
    "stages",
    "convs_per_stage",
    "base_channels",
    "in_channels",
    "fusion_mode",
    "mid_channels",
)


@dataclass
class EdgeNetConfig:
    """Architecture plus the per-level tracing-loss settings."""

    stages: int = 3
    convs_per_stage: int = 2
    base_channels: int = 16
    in_channels: int = 1
    fusion_mode: str = "fixed"
    mid_channels: int = DEFAULT_MID_CHANNELS
    init_sigma: float = 0.01
    level_groups: dict[int, TracingConfig] = field(default_factory=dict)
    final_loss: TracingConfig = field(default_factory=TracingConfig)

    def __post_init__(self) -> None:
        for name in ("stages", "convs_per_stage", "base_channels", "in_channels", "mid_channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.fusion_mode not in FUSION_MODES:
            raise ValueError(
                f"fusion_mode must be one of {sorted(FUSION_MODES)}, got '{self.fusion_mode}'"
            )
        extra = set(self.level_groups) - set(range(1, self.stages + 1))
        if extra:
            raise ValueError(f"level_groups names stages {sorted(extra)} outside 1..{self.stages}")
        self.level_groups = {
            s: self.level_groups.get(s, TracingConfig()) for s in range(1, self.stages + 1)
        }

    def stage_channels(self, stage: int) -> int:
        return self.base_channels * 2 ** (stage - 1)

    @property
    def min_size(self) -> int:
        return 2 ** (self.stages - 1)

    def architecture(self) -> dict[str, Any]:
        """The fields a model file records."""
        return {key: getattr(self, key) for key in ARCHITECTURE_KEYS}

    @classmethod
    def from_architecture(cls, arch: dict[str, Any], **overrides: Any) -> EdgeNetConfig:
        unknown = set(arch) - set(ARCHITECTURE_KEYS)
        if unknown:
            raise ValueError(f"unknown architecture keys: {sorted(unknown)}")
        return cls(**{**arch, **overrides})


@dataclass
class ForwardResult:
    pack: SidePack
    final_logit: Node
    weights: Node | None  # H x W x L in cofusion mode


def build_fusion(state: ModelState, cfg: EdgeNetConfig) -> Fusion:
    if cfg.fusion_mode == CoFusion.mode:
        return CoFusion(
            CoFusionParams(
                conv1=state.kernel("fusion.conv1"),
                conv2=state.kernel("fusion.conv2"),
                conv3=state.kernel("fusion.conv3"),
            )
        )
    return FixedFusion(state.params["fusion.weight"])


def forward_with_weights(image: Grid, state: ModelState, cfg: EdgeNetConfig) -> ForwardResult:
    """Run the network and keep the fusion weight maps."""
    h, w, c = image.shape
    if c != cfg.in_channels:
        raise ValueError(f"image has {c} channels, network expects {cfg.in_channels}")
    if h < cfg.min_size or w < cfg.min_size:
        raise ValueError(
            f"image {h}x{w} is smaller than {cfg.min_size} px needed for {cfg.stages} stages"
        )

    x = Node.constant(image)
    sides: list[Node] = []
    for s in range(1, cfg.stages + 1):
        if s > 1:
            x = ops.maxpool2(x)
        for j in range(1, cfg.convs_per_stage + 1):
            x = ops.relu(ops.conv2d(x, state.kernel(f"stage{s}.conv{j}")))
        side = ops.conv2d(x, state.kernel(f"stage{s}.head"))
        side = ops.upsample_bilinear(side, 2 ** (s - 1))
        sides.append(ops.crop(side, h, w))

    pack = SidePack(sides)
    final_logit, weights = build_fusion(state, cfg).fuse(pack)
    return ForwardResult(pack=pack, final_logit=final_logit, weights=weights)


def forward(image: Grid, state: ModelState, cfg: EdgeNetConfig) -> tuple[SidePack, Node]:
    result = forward_with_weights(image, state, cfg)
    return result.pack, result.final_logit


def loss_terms(pack: SidePack, final_logit: Node, label: EdgeLabel, cfg: EdgeNetConfig) -> LossTerms:
    """Deeply supervised loss with the weighted components summed over all maps."""
    if (pack.height, pack.width) != label.shape:
        raise ValueError(f"label {label.shape} does not match side maps {(pack.height, pack.width)}")
    maps = [(side, cfg.level_groups[s]) for s, side in enumerate(pack.sides, start=1)]
    maps.append((final_logit, cfg.final_loss))

    total: Node | None = None
    ce = bdry = tex = 0.0
    for logit, level_cfg in maps:
        terms = tracing_terms(ops.sigmoid(logit), label, level_cfg)
        total = terms.total if total is None else ops.add(total, terms.total)
        ce += terms.ce
        bdry += terms.bdry
        tex += terms.tex
    return LossTerms(total=total, ce=ce, bdry=bdry, tex=tex)


def total_loss(pack: SidePack, final_logit: Node, label: EdgeLabel, cfg: EdgeNetConfig) -> Node:
    """Sum of tracing losses over every side map and the fused map."""
    return loss_terms(pack, final_logit, label, cfg).total


@dataclass
class Prediction:
    """Probability maps of one image: fused, per side, and per-side fusion weights."""

    final: Grid
    sides: list[Grid]
    weights: list[Grid]  # empty in fixed mode


def predict(image: Grid, state: ModelState, cfg: EdgeNetConfig) -> Prediction:
    result = forward_with_weights(image, state, cfg)
    sides = [ops.sigmoid(side).value for side in result.pack.sides]
    weights = []
    if result.weights is not None:
        w = result.weights.data
        weights = [Grid(w[:, :, i]) for i in range(w.shape[2])]
    return Prediction(final=ops.sigmoid(result.final_logit).value, sides=sides, weights=weights)
