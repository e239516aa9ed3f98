"""
Edge network: side-output backbone, CoFusion / fixed fusion, parameters.
"""

from .cofusion import (
    CoFusion,
    CoFusionParams,
    FixedFusion,
    Fusion,
    SidePack,
    cofusion_forward,
    fixed_weight_fusion,
)
from .edgenet import (
    EdgeNetConfig,
    ForwardResult,
    Prediction,
    forward,
    forward_with_weights,
    loss_terms,
    predict,
    total_loss,
)
from .rng import XorShift64Star
from .state import ModelState, init_params, load_state, save_state

__all__ = [
    "CoFusion",
    "CoFusionParams",
    "FixedFusion",
    "Fusion",
    "SidePack",
    "cofusion_forward",
    "fixed_weight_fusion",
    "EdgeNetConfig",
    "ForwardResult",
    "Prediction",
    "predict",
    "forward",
    "forward_with_weights",
    "loss_terms",
    "total_loss",
    "XorShift64Star",
    "ModelState",
    "init_params",
    "load_state",
    "save_state",
]
