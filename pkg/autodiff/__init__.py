"""
Dense-grid numerics with reverse-mode differentiation.

Provides the Grid value type, convolution Kernels, differentiable Nodes and
the operations needed to express the tracing loss, the fusion block and the
miniature edge network.
"""

from .grid import Grid
from .kernel import Kernel
from .node import Node, backward, topological_order, zero_grad
from . import ops
from .gradcheck import GradCheckResult, check_gradients

__all__ = [
    "Grid",
    "Kernel",
    "Node",
    "backward",
    "zero_grad",
    "topological_order",
    "ops",
    "GradCheckResult",
    "check_gradients",
]
