"""
Naive per-pixel evaluation of the tracing loss.

Walks every center pixel and sums its clipped patch explicitly, with no
convolutions and no graph. Used to cross-check the convolutional path.
"""

from __future__ import annotations

import math

import numpy as np

from autodiff import Grid
from losses.labels import EdgeLabel
from losses.tracing import TracingConfig


def _patch(arr: np.ndarray, r: int, c: int, k: int) -> np.ndarray:
    half = k // 2
    h, w = arr.shape
    return arr[max(r - half, 0) : min(r + half + 1, h), max(c - half, 0) : min(c + half + 1, w)]


def _clamped_log(x: float, epsilon: float) -> float:
    return math.log(min(max(x, epsilon), 1.0))


def ce_oracle(y_hat: np.ndarray, label: EdgeLabel, lam: float, epsilon: float) -> float:
    alpha = label.alpha
    h, w = y_hat.shape
    pos = neg = 0.0
    for r in range(h):
        for c in range(w):
            if label.positive_mask[r, c]:
                pos += _clamped_log(y_hat[r, c], epsilon)
            elif label.negative_mask[r, c]:
                neg += _clamped_log(1.0 - y_hat[r, c], epsilon)
    return -lam * alpha * pos - (1.0 - alpha) * neg


def bdry_oracle(y_hat: np.ndarray, label: EdgeLabel, k_bdry: int, epsilon: float) -> float:
    total = 0.0
    for r, c in label.edge_set:
        values = _patch(y_hat, r, c, k_bdry)
        on_edge = _patch(label.positive_mask, r, c, k_bdry)
        s_edge = 0.0
        s_all = 0.0
        for v, e in zip(values.ravel(), on_edge.ravel()):
            s_all += v
            if e:
                s_edge += v
        total -= _clamped_log(s_edge / max(s_all, epsilon), epsilon)
    return total


def tex_oracle(y_hat: np.ndarray, label: EdgeLabel, k_tex: int, epsilon: float) -> float:
    total = 0.0
    h, w = y_hat.shape
    for r in range(h):
        for c in range(w):
            if not label.negative_mask[r, c] or label.buffer_mask[r, c]:
                continue
            values = _patch(y_hat, r, c, k_tex)
            mean = sum(values.ravel()) / values.size
            total -= _clamped_log(1.0 - mean, epsilon)
    return total


def loss_oracle(pred: Grid, label: EdgeLabel, cfg: TracingConfig) -> float:
    """Same value as tracing_loss, computed by explicit patch loops."""
    if pred.shape != (*label.shape, 1):
        raise ValueError(f"prediction shape {pred.shape} does not match label {label.shape}")
    y_hat = pred.plane()
    total = ce_oracle(y_hat, label, cfg.lam, cfg.epsilon)
    if cfg.lambda1 > 0:
        total += cfg.lambda1 * bdry_oracle(y_hat, label, cfg.k_bdry, cfg.epsilon)
    if cfg.lambda2 > 0:
        total += cfg.lambda2 * tex_oracle(y_hat, label, cfg.k_tex, cfg.epsilon)
    return total
