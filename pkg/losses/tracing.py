"""
The tracing loss: weighted cross entropy, boundary tracing and texture
suppression, computed with box-sum convolutions on the autodiff graph.

All three terms are sums over pixels (not means). Every log argument and the
boundary ratio are clamped to [epsilon, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from autodiff import Kernel, Node, ops
from losses.labels import EdgeLabel


@dataclass(frozen=True)
class TracingConfig:
    """Weights and patch sizes for one supervision level."""

    lam: float = 1.1  # CE positive/negative balance
    lambda1: float = 0.0  # boundary tracing weight
    lambda2: float = 0.0  # texture suppression weight
    k_bdry: int = 7
    k_tex: int = 3
    epsilon: float = 1e-10

    def __post_init__(self) -> None:
        for name in ("lam", "lambda1", "lambda2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("k_bdry", "k_tex"):
            k = getattr(self, name)
            if k < 1 or k % 2 == 0:
                raise ValueError(f"{name} must be odd and positive, got {k}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


@dataclass
class LossTerms:
    """Weighted components of one tracing loss evaluation."""

    total: Node
    ce: float
    bdry: float
    tex: float


def _check_pred(pred: Node, label: EdgeLabel) -> None:
    if pred.shape != (*label.shape, 1):
        raise ValueError(f"prediction shape {pred.shape} does not match label {label.shape}")


def box_sum(x: Node, k: int) -> Node:
    """Sum over the border-clipped k x k box centered at every pixel."""
    return ops.conv2d(x, Kernel.box(k), zero_pad=True)


def box_counts(height: int, width: int, k: int) -> np.ndarray:
    """Number of in-image pixels in each clipped k x k box."""
    r = k // 2
    rows = np.minimum(np.arange(height) + r, height - 1) - np.maximum(np.arange(height) - r, 0) + 1
    cols = np.minimum(np.arange(width) + r, width - 1) - np.maximum(np.arange(width) - r, 0) + 1
    return np.outer(rows, cols).astype(np.float64)


def loss_ce(pred: Node, label: EdgeLabel, lam: float = 1.1, epsilon: float = 1e-10) -> Node:
    """
    Class-balanced cross entropy over Y+ and Y-; the excluded band is ignored.

    Raises:
        ValueError: Y+ and Y- are both empty
    """
    _check_pred(pred, label)
    alpha = label.alpha
    log_pos = ops.log(ops.clamp(pred, epsilon, 1.0))
    log_neg = ops.log(ops.clamp(ops.add_scalar(ops.negate(pred), 1.0), epsilon, 1.0))
    pos = ops.scale(ops.masked_sum(log_pos, label.positive_mask), -lam * alpha)
    neg = ops.scale(ops.masked_sum(log_neg, label.negative_mask), -(1.0 - alpha))
    return ops.add(pos, neg)


def loss_bdry(pred: Node, label: EdgeLabel, k_bdry: int = 7, epsilon: float = 1e-10) -> Node:
    """
    Boundary tracing: for every edge pixel p, -log of the share of the
    k_bdry-box response that sits on edge pixels. Zero when E is empty.
    """
    _check_pred(pred, label)
    edges = label.positive_mask
    if not edges.any():
        return Node.constant(0.0)
    on_edges = ops.multiply(pred, Node.constant(edges[:, :, None].astype(np.float64)))
    s_edge = ops.gather(box_sum(on_edges, k_bdry), edges)
    s_all = ops.gather(box_sum(pred, k_bdry), edges)
    ratio = ops.divide(s_edge, ops.clamp(s_all, epsilon, np.inf))
    return ops.negate(ops.sum_all(ops.log(ops.clamp(ratio, epsilon, 1.0))))


def texture_centers(label: EdgeLabel) -> np.ndarray:
    """Pixels with y == 0 outside the buffer zone."""
    return label.negative_mask & ~label.buffer_mask


def loss_tex(pred: Node, label: EdgeLabel, k_tex: int = 3, epsilon: float = 1e-10) -> Node:
    """
    Texture suppression: for every center outside the buffer zone, -log of
    one minus the mean response over its clipped k_tex box. Zero when no
    center remains.
    """
    _check_pred(pred, label)
    centers = texture_centers(label)
    if not centers.any():
        return Node.constant(0.0)
    h, w = label.shape
    inv_counts = Node.constant(1.0 / box_counts(h, w, k_tex)[:, :, None])
    mean = ops.multiply(box_sum(pred, k_tex), inv_counts)
    keep = ops.add_scalar(ops.negate(ops.gather(mean, centers)), 1.0)
    return ops.negate(ops.sum_all(ops.log(ops.clamp(keep, epsilon, 1.0))))


def tracing_terms(pred: Node, label: EdgeLabel, cfg: TracingConfig) -> LossTerms:
    """L_ce + lambda1 * L_bdry + lambda2 * L_tex, with the weighted parts broken out."""
    ce = loss_ce(pred, label, cfg.lam, cfg.epsilon)
    total = ce
    bdry_value = tex_value = 0.0
    if cfg.lambda1 > 0:
        bdry = ops.scale(loss_bdry(pred, label, cfg.k_bdry, cfg.epsilon), cfg.lambda1)
        bdry_value = bdry.item()
        total = ops.add(total, bdry)
    if cfg.lambda2 > 0:
        tex = ops.scale(loss_tex(pred, label, cfg.k_tex, cfg.epsilon), cfg.lambda2)
        tex_value = tex.item()
        total = ops.add(total, tex)
    return LossTerms(total=total, ce=ce.item(), bdry=bdry_value, tex=tex_value)


def tracing_loss(pred: Node, label: EdgeLabel, cfg: TracingConfig) -> Node:
    """The full tracing loss as one differentiable scalar."""
    return tracing_terms(pred, label, cfg).total
