"""
Differentiable operations on Nodes.

Every function takes Nodes, returns a new Node whose value is a fresh Grid,
and records one local-gradient rule per parent. Binary elementwise ops
require identical shapes (no broadcasting). Reductions and convolutions
accumulate in a fixed order so repeated evaluations are bit-identical.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from autodiff.grid import Grid
from autodiff.kernel import Kernel
from autodiff.node import Node


def _node(arr: np.ndarray, *parents, name: str | None = None) -> Node:
    return Node(Grid.wrap(arr), parents, name=name)


def _same_shape(a: Node, b: Node, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _as_mask(mask: np.ndarray, shape: tuple[int, int, int]) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 2:
        mask = mask[:, :, None]
    if mask.shape != shape:
        raise ValueError(f"mask shape {mask.shape} does not match grid {shape}")
    return mask


# =============================================================================
# Elementwise
# =============================================================================


def add(a: Node, b: Node) -> Node:
    _same_shape(a, b, "add")
    return _node(a.data + b.data, (a, lambda g: g), (b, lambda g: g))


def multiply(a: Node, b: Node) -> Node:
    """Hadamard product."""
    _same_shape(a, b, "multiply")
    x, y = a.data, b.data
    return _node(x * y, (a, lambda g: g * y), (b, lambda g: g * x))


def divide(a: Node, b: Node) -> Node:
    _same_shape(a, b, "divide")
    x, y = a.data, b.data
    if np.any(y == 0.0):
        raise ValueError("divide: zero in denominator; clamp it first")
    return _node(x / y, (a, lambda g: g / y), (b, lambda g: -g * x / (y * y)))


def negate(a: Node) -> Node:
    return _node(-a.data, (a, lambda g: -g))


def scale(a: Node, factor: float) -> Node:
    factor = float(factor)
    return _node(a.data * factor, (a, lambda g: g * factor))


def add_scalar(a: Node, value: float) -> Node:
    return _node(a.data + float(value), (a, lambda g: g))


def log(a: Node) -> Node:
    x = a.data
    if np.any(x <= 0.0):
        raise ValueError("log of non-positive input; clamp before taking the log")
    return _node(np.log(x), (a, lambda g: g / x))


def clamp(a: Node, lo: float, hi: float) -> Node:
    """Clip into [lo, hi]; gradient passes only where lo <= x <= hi."""
    if lo > hi:
        raise ValueError(f"clamp: lo {lo} > hi {hi}")
    x = a.data
    inside = (x >= lo) & (x <= hi)
    return _node(np.clip(x, lo, hi), (a, lambda g: g * inside), name="clamp")


def relu(a: Node) -> Node:
    x = a.data
    active = x > 0.0
    return _node(np.where(active, x, 0.0), (a, lambda g: g * active), name="relu")


def sigmoid(a: Node) -> Node:
    s = expit(a.data)
    return _node(s, (a, lambda g: g * s * (1.0 - s)))


# =============================================================================
# Channel-wise
# =============================================================================


def channel_softmax(a: Node) -> Node:
    """Per-pixel softmax across channels, stabilized by the per-pixel max."""
    x = a.data
    e = np.exp(x - x.max(axis=2, keepdims=True))
    s = e / e.sum(axis=2, keepdims=True)

    def rule(g: np.ndarray) -> np.ndarray:
        return s * (g - (g * s).sum(axis=2, keepdims=True))

    return _node(s, (a, rule))


def channel_sum(a: Node) -> Node:
    """Sum across channels -> (H, W, 1)."""
    channels = a.shape[2]
    return _node(
        a.data.sum(axis=2, keepdims=True),
        (a, lambda g: np.repeat(g, channels, axis=2)),
    )


def concat_channels(nodes: Sequence[Node]) -> Node:
    if not nodes:
        raise ValueError("concat_channels needs at least one node")
    h, w = nodes[0].shape[:2]
    for n in nodes:
        if n.shape[:2] != (h, w):
            raise ValueError(f"concat_channels: spatial mismatch {n.shape[:2]} vs {(h, w)}")
    bounds = np.cumsum([0] + [n.shape[2] for n in nodes])
    parents = []
    for n, start, stop in zip(nodes, bounds[:-1], bounds[1:]):
        parents.append((n, lambda g, s=start, e=stop: g[:, :, s:e]))
    return _node(np.concatenate([n.data for n in nodes], axis=2), *parents)


def broadcast_pixels(a: Node, height: int, width: int) -> Node:
    """Tile a (1, 1, C) node to (height, width, C)."""
    if a.shape[:2] != (1, 1):
        raise ValueError(f"broadcast_pixels needs a (1, 1, C) node, got {a.shape}")
    c = a.shape[2]
    return _node(
        np.broadcast_to(a.data, (height, width, c)).copy(),
        (a, lambda g: g.sum(axis=(0, 1)).reshape(1, 1, c)),
    )


def select_channel(a: Node, channel: int) -> Node:
    if not 0 <= channel < a.shape[2]:
        raise ValueError(f"channel {channel} out of range for {a.shape}")

    def rule(g: np.ndarray) -> np.ndarray:
        full = np.zeros(a.shape)
        full[:, :, channel] = g[:, :, 0]
        return full

    return _node(a.data[:, :, channel : channel + 1].copy(), (a, rule))


# =============================================================================
# Spatial
# =============================================================================


def conv2d(x: Node, kernel: Kernel, zero_pad: bool = True) -> Node:
    """
    Stride-1 cross-correlation. With zero_pad the output keeps the input's
    spatial size; otherwise it shrinks by (kh - 1, kw - 1).

    Each output starts from its bias and accumulates taps in (ky, kx,
    in-channel) order, kernel row-major, so results are bit-identical to a
    plain nested loop over the same order.
    """
    if x.shape[2] != kernel.in_channels:
        raise ValueError(
            f"conv2d: input has {x.shape[2]} channels, kernel expects {kernel.in_channels}"
        )
    kh, kw = kernel.kh, kernel.kw
    cin, cout = kernel.in_channels, kernel.out_channels
    h, w, _ = x.shape
    ph, pw = (kh // 2, kw // 2) if zero_pad else (0, 0)
    if h + 2 * ph < kh or w + 2 * pw < kw:
        raise ValueError(f"conv2d: input {h}x{w} smaller than kernel {kh}x{kw}")

    padded = np.pad(x.data, ((ph, ph), (pw, pw), (0, 0)))
    oh, ow = padded.shape[0] - kh + 1, padded.shape[1] - kw + 1
    weights = kernel.weight_array()
    out = np.broadcast_to(kernel.bias.data, (oh, ow, cout)).copy()
    for ky in range(kh):
        for kx in range(kw):
            for c in range(cin):
                out += padded[ky : ky + oh, kx : kx + ow, c, None] * weights[ky, kx, c]
    w2 = weights.reshape(kh * kw * cin, cout)

    def input_rule(g: np.ndarray) -> np.ndarray:
        dcols = (g.reshape(-1, cout) @ w2.T).reshape(oh, ow, kh, kw, cin)
        dpad = np.zeros(padded.shape)
        for ky in range(kh):
            for kx in range(kw):
                dpad[ky : ky + oh, kx : kx + ow, :] += dcols[:, :, ky, kx, :]
        return dpad[ph : ph + h, pw : pw + w, :]

    def weight_rule(g: np.ndarray) -> np.ndarray:
        # (oh, ow, cin, kh, kw) -> (oh*ow, kh*kw*cin)
        cols = (
            sliding_window_view(padded, (kh, kw), axis=(0, 1))
            .transpose(0, 1, 3, 4, 2)
            .reshape(oh * ow, kh * kw * cin)
        )
        return (cols.T @ g.reshape(-1, cout)).reshape(kh, kw, cin * cout)

    def bias_rule(g: np.ndarray) -> np.ndarray:
        return g.sum(axis=(0, 1)).reshape(1, 1, cout)

    return _node(
        out,
        (x, input_rule),
        (kernel.weight, weight_rule),
        (kernel.bias, bias_rule),
    )


def maxpool2(x: Node) -> Node:
    """
    2x2 stride-2 max pooling. Odd extents are padded by replicating the last
    row/column. Gradient goes to the first (row-major) maximum of each window.
    """
    h, w, c = x.shape
    ph, pw = h % 2, w % 2
    padded = np.pad(x.data, ((0, ph), (0, pw), (0, 0)), mode="edge")
    hp, wp = padded.shape[:2]
    windows = (
        padded.reshape(hp // 2, 2, wp // 2, 2, c)
        .transpose(0, 2, 4, 1, 3)
        .reshape(hp // 2, wp // 2, c, 4)
    )
    idx = windows.argmax(axis=3)
    out = np.take_along_axis(windows, idx[..., None], axis=3)[..., 0]

    def rule(g: np.ndarray) -> np.ndarray:
        slots = np.zeros(windows.shape)
        np.put_along_axis(slots, idx[..., None], g[..., None], axis=3)
        dpad = (
            slots.reshape(hp // 2, wp // 2, c, 2, 2)
            .transpose(0, 3, 1, 4, 2)
            .reshape(hp, wp, c)
        )
        if ph:
            dpad[h - 1] += dpad[h]
            dpad = dpad[:h]
        if pw:
            dpad[:, w - 1] += dpad[:, w]
            dpad = dpad[:, :w]
        return dpad

    return _node(out, (x, rule), name="maxpool2")


def _interp_matrix(n_in: int, factor: int) -> np.ndarray:
    """Linear interpolation weights, half-pixel centers, edges clamped."""
    n_out = n_in * factor
    src = np.clip((np.arange(n_out) + 0.5) / factor - 0.5, 0.0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    m = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(m, (rows, lo), 1.0 - frac)
    np.add.at(m, (rows, hi), frac)
    return m


def upsample_bilinear(x: Node, factor: int) -> Node:
    """Bilinear upsampling by an integer factor (align-corners false)."""
    if factor < 1:
        raise ValueError(f"upsample factor must be >= 1, got {factor}")
    if factor == 1:
        return x
    h, w, _ = x.shape
    my = _interp_matrix(h, factor)
    mx = _interp_matrix(w, factor)
    out = np.einsum("ah,hwc,bw->abc", my, x.data, mx)
    return _node(out, (x, lambda g: np.einsum("ah,abc,bw->hwc", my, g, mx)))


def crop(x: Node, height: int, width: int) -> Node:
    """Keep the top-left height x width window."""
    h, w, c = x.shape
    if height > h or width > w:
        raise ValueError(f"crop {height}x{width} larger than {h}x{w}")
    if (height, width) == (h, w):
        return x

    def rule(g: np.ndarray) -> np.ndarray:
        full = np.zeros((h, w, c))
        full[:height, :width] = g
        return full

    return _node(x.data[:height, :width].copy(), (x, rule))


# =============================================================================
# Reductions
# =============================================================================


def sum_all(x: Node) -> Node:
    shape = x.shape
    return _node(
        np.full((1, 1, 1), x.data.sum()),
        (x, lambda g: np.full(shape, g.reshape(-1)[0])),
    )


def masked_sum(x: Node, mask: np.ndarray) -> Node:
    """Sum over pixels where mask is set."""
    m = _as_mask(mask, x.shape)
    return _node(
        np.full((1, 1, 1), x.data[m].sum()),
        (x, lambda g: m * g.reshape(-1)[0]),
    )


def gather(x: Node, mask: np.ndarray) -> Node:
    """Masked values in row-major order as an (n, 1, 1) grid."""
    m = _as_mask(mask, x.shape)
    n = int(m.sum())
    if n == 0:
        raise ValueError("gather: empty mask")

    def rule(g: np.ndarray) -> np.ndarray:
        full = np.zeros(m.shape)
        full[m] = g.reshape(-1)
        return full

    return _node(x.data[m].reshape(n, 1, 1), (x, rule))
