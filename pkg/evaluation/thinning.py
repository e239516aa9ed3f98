"""
Zhang-Suen skeletonization plus a cleanup pass that breaks any remaining
2x2 foreground block at a simple point, so the result is one pixel wide.
"""

from __future__ import annotations

import numpy as np
from skimage.morphology import skeletonize

# Neighbour offsets, clockwise from north
_RING = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def _ring_components(mask: np.ndarray, r: int, c: int) -> int:
    """8-connected components among the foreground 8-neighbours of (r, c)."""
    h, w = mask.shape
    points = [
        (dr, dc)
        for dr, dc in _RING
        if 0 <= r + dr < h and 0 <= c + dc < w and mask[r + dr, c + dc]
    ]
    parent = list(range(len(points)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, (ar, ac) in enumerate(points):
        for j in range(i + 1, len(points)):
            br, bc = points[j]
            if max(abs(ar - br), abs(ac - bc)) == 1:
                parent[find(i)] = find(j)
    return len({find(i) for i in range(len(points))})


def break_blocks(mask: np.ndarray) -> np.ndarray:
    """Remove one simple point from every 2x2 all-foreground block."""
    out = np.asarray(mask, dtype=bool).copy()
    while True:
        blocks = out[:-1, :-1] & out[:-1, 1:] & out[1:, :-1] & out[1:, 1:]
        if not blocks.any():
            return out
        r, c = (int(v) for v in np.argwhere(blocks)[0])
        corners = [(r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)]
        # Prefer a corner whose removal keeps its neighbourhood connected
        victim = next((p for p in corners if _ring_components(out, *p) == 1), corners[0])
        out[victim] = False


def thin(mask: np.ndarray) -> np.ndarray:
    """Zhang-Suen skeleton with 2x2 blocks broken."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return mask.copy()
    return break_blocks(skeletonize(mask, method="zhang"))
