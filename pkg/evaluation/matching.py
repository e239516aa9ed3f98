"""
Tolerance-limited one-to-one correspondence between predicted and
ground-truth edge pixels.

Pixels are paired only when their Euclidean distance is at most the match
radius; the pairing is a maximum-cardinality bipartite matching over the
sparse prediction x ground-truth adjacency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

UNMATCHED = -1


@dataclass
class Correspondence:
    tp: int
    fp: int
    fn: int
    matching: list[tuple[tuple[int, int], tuple[int, int]]] = field(default_factory=list, repr=False)


def disk_offsets(radius: int) -> list[tuple[int, int]]:
    """Offsets with dy^2 + dx^2 <= radius^2, nearest first, then row-major."""
    r = int(radius)
    offsets = [
        (dy, dx)
        for dy in range(-r, r + 1)
        for dx in range(-r, r + 1)
        if dy * dy + dx * dx <= r * r
    ]
    return sorted(offsets, key=lambda o: (o[0] * o[0] + o[1] * o[1], o[0], o[1]))


def build_adjacency(pred: np.ndarray, gt: np.ndarray, radius: int) -> tuple[np.ndarray, np.ndarray, csr_matrix]:
    """
    Returns:
        (pred coords, gt coords, sparse adjacency with one row per
        predicted pixel and one column per ground-truth pixel)
    """
    pred_pts = np.argwhere(pred)
    gt_pts = np.argwhere(gt)
    h, w = gt.shape
    index = np.full((h, w), UNMATCHED, dtype=np.int64)
    index[gt_pts[:, 0], gt_pts[:, 1]] = np.arange(len(gt_pts))

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    if len(pred_pts) and len(gt_pts):
        for dy, dx in disk_offsets(radius):
            r = pred_pts[:, 0] + dy
            c = pred_pts[:, 1] + dx
            inside = np.flatnonzero((r >= 0) & (r < h) & (c >= 0) & (c < w))
            hits = index[r[inside], c[inside]]
            found = hits != UNMATCHED
            rows.append(inside[found])
            cols.append(hits[found])
    u = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    v = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    graph = csr_matrix(
        (np.ones(len(u), dtype=np.int8), (u, v)),
        shape=(len(pred_pts), len(gt_pts)),
    )
    return pred_pts, gt_pts, graph


def correspond(pred: np.ndarray, gt: np.ndarray, radius: int) -> Correspondence:
    """
    Match a binary prediction against binary ground truth.

    Args:
        pred: Boolean H x W prediction
        gt: Boolean H x W ground truth
        radius: Match radius in pixels (>= 1)
    """
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    if radius < 1:
        raise ValueError(f"match radius must be >= 1, got {radius}")
    pred_pts, gt_pts, graph = build_adjacency(pred, gt, radius)
    if graph.nnz == 0:
        return Correspondence(tp=0, fp=len(pred_pts), fn=len(gt_pts))

    # partner column of each row, or -1
    partner = maximum_bipartite_matching(graph, perm_type="column")
    matched = np.flatnonzero(partner != UNMATCHED)
    matching = [
        (tuple(int(c) for c in pred_pts[u]), tuple(int(c) for c in gt_pts[partner[u]]))
        for u in matched
    ]
    tp = len(matching)
    return Correspondence(tp=tp, fp=len(pred_pts) - tp, fn=len(gt_pts) - tp, matching=matching)
