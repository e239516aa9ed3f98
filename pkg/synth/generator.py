"""
Synthetic edge dataset: textured shapes on a textured background, exact
1-px region boundaries, and jittered multi-annotator consensus.

Image i is generated from np.random.default_rng([seed, i]) alone, so images
are independent of each other and of generation order.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from autodiff import Grid
from evaluation.thinning import thin
from utils.config import ConfigError

logger = logging.getLogger(__name__)

SHAPE_KINDS = ("rectangle", "circle", "triangle")
TEXTURE_KINDS = ("flat", "sinusoid", "checker")
MARGIN = 2
MIN_EXTENT = 6
MAX_PLACEMENT_TRIES = 20


@dataclass
class SynthSpec:
    image_size: int = 64
    num_images: int = 200
    min_shapes: int = 1
    max_shapes: int = 4
    max_amplitude: float = 0.4
    min_period: int = 2
    max_period: int = 6
    annotators: int = 5
    annotator_jitter: int = 1
    seed: int = 0
    kinds: tuple[str, ...] = field(default=SHAPE_KINDS)

    def validate(self) -> None:
        """
        Raises:
            ConfigError: shapes cannot fit, or a range is inverted/out of bounds
        """
        if self.image_size < 2 * MARGIN + MIN_EXTENT:
            raise ConfigError(
                f"image_size {self.image_size} cannot fit a {MIN_EXTENT} px shape with a "
                f"{MARGIN} px margin (need >= {2 * MARGIN + MIN_EXTENT})"
            )
        if self.num_images < 1:
            raise ConfigError(f"num_images must be >= 1, got {self.num_images}")
        if not 1 <= self.min_shapes <= self.max_shapes:
            raise ConfigError(f"need 1 <= min_shapes <= max_shapes, got {self.min_shapes}..{self.max_shapes}")
        if not 0.0 <= self.max_amplitude <= 0.4:
            raise ConfigError(f"max_amplitude must lie in [0, 0.4], got {self.max_amplitude}")
        if not 2 <= self.min_period <= self.max_period <= 6:
            raise ConfigError(f"need 2 <= min_period <= max_period <= 6, got {self.min_period}..{self.max_period}")
        if self.annotators < 1 or self.annotator_jitter < 0:
            raise ConfigError("annotators must be >= 1 and annotator_jitter >= 0")
        unknown = set(self.kinds) - set(SHAPE_KINDS)
        if not self.kinds or unknown:
            raise ConfigError(f"shape kinds must be drawn from {SHAPE_KINDS}, got {self.kinds}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kinds"] = list(self.kinds)
        return d


@dataclass
class SynthSample:
    image: Grid
    consensus: Grid
    edges: np.ndarray  # true boundary, bool H x W


# =============================================================================
# Rasterization
# =============================================================================


def _rectangle(rng: np.random.Generator, size: int) -> np.ndarray:
    lo, hi = MARGIN, size - MARGIN  # usable [lo, hi)
    h = int(rng.integers(MIN_EXTENT, hi - lo + 1))
    w = int(rng.integers(MIN_EXTENT, hi - lo + 1))
    top = int(rng.integers(lo, hi - h + 1))
    left = int(rng.integers(lo, hi - w + 1))
    mask = np.zeros((size, size), dtype=bool)
    mask[top : top + h, left : left + w] = True
    return mask


def _circle(rng: np.random.Generator, size: int) -> np.ndarray:
    lo, hi = MARGIN, size - MARGIN
    radius = float(rng.uniform(MIN_EXTENT / 2, (hi - lo) / 2))
    cy = float(rng.uniform(lo + radius - 0.5, hi - radius - 0.5))
    cx = float(rng.uniform(lo + radius - 0.5, hi - radius - 0.5))
    yy, xx = np.mgrid[0:size, 0:size]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2


def _triangle(rng: np.random.Generator, size: int) -> np.ndarray:
    lo, hi = MARGIN, size - MARGIN - 1
    yy, xx = np.mgrid[0:size, 0:size]
    for _ in range(MAX_PLACEMENT_TRIES):
        pts = rng.uniform(lo, hi, size=(3, 2))
        (y0, x0), (y1, x1), (y2, x2) = pts
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if abs(area) < MIN_EXTENT**2:
            continue
        sign = np.sign(area)
        d0 = ((x1 - x0) * (yy - y0) - (y1 - y0) * (xx - x0)) * sign
        d1 = ((x2 - x1) * (yy - y1) - (y2 - y1) * (xx - x1)) * sign
        d2 = ((x0 - x2) * (yy - y2) - (y0 - y2) * (xx - x2)) * sign
        mask = (d0 >= 0) & (d1 >= 0) & (d2 >= 0)
        if mask.any():
            return mask
    # Degenerate draws every time: fall back to a rectangle
    return _rectangle(rng, size)


_RASTERIZERS = {"rectangle": _rectangle, "circle": _circle, "triangle": _triangle}


def _texture(rng: np.random.Generator, size: int, spec: SynthSpec) -> np.ndarray:
    """Zero-mean pattern spanning [-a/2, a/2]."""
    kind = TEXTURE_KINDS[int(rng.integers(len(TEXTURE_KINDS)))]
    amplitude = float(rng.uniform(0.0, spec.max_amplitude))
    period = int(rng.integers(spec.min_period, spec.max_period + 1))
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    if kind == "flat":
        return np.zeros((size, size))
    if kind == "sinusoid":
        theta = float(rng.uniform(0.0, np.pi))
        phase = float(rng.uniform(0.0, 2 * np.pi))
        return 0.5 * amplitude * np.sin(2 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / period + phase)
    checks = ((yy // period + xx // period) % 2) * 2.0 - 1.0
    return 0.5 * amplitude * checks


def region_boundaries(regions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Pixels whose right or lower neighbour lies in another region, thinned.

    Returns:
        (edge mask, owner) where owner is the topmost region id touching
        each edge pixel
    """
    right = np.zeros_like(regions, dtype=bool)
    down = np.zeros_like(regions, dtype=bool)
    right[:, :-1] = regions[:, :-1] != regions[:, 1:]
    down[:-1, :] = regions[:-1, :] != regions[1:, :]
    owner = regions.copy()
    owner[:, :-1] = np.where(right[:, :-1], np.maximum(regions[:, :-1], regions[:, 1:]), owner[:, :-1])
    owner[:-1, :] = np.where(down[:-1, :], np.maximum(owner[:-1, :], regions[1:, :]), owner[:-1, :])
    edges = thin(right | down)
    return edges, np.where(edges, owner, 0)


def annotate(
    edges: np.ndarray,
    owner: np.ndarray,
    shapes: int,
    annotators: int,
    jitter: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Consensus map: each annotator traces every shape's edges shifted by an
    integer offset of at most `jitter` along one randomly chosen axis.
    """
    size_h, size_w = edges.shape
    votes = np.zeros(edges.shape, dtype=np.int64)
    coords = {k: np.argwhere(edges & (owner == k)) for k in range(1, shapes + 1)}
    for _ in range(annotators):
        drawn = np.zeros(edges.shape, dtype=bool)
        for k in range(1, shapes + 1):
            offset = int(rng.integers(-jitter, jitter + 1)) if jitter else 0
            axis = int(rng.integers(2))
            pts = coords[k]
            if pts.size == 0:
                continue
            shifted = pts.copy()
            shifted[:, axis] += offset
            shifted[:, 0] = np.clip(shifted[:, 0], 0, size_h - 1)
            shifted[:, 1] = np.clip(shifted[:, 1], 0, size_w - 1)
            drawn[shifted[:, 0], shifted[:, 1]] = True
        votes += drawn
    return votes / annotators


def generate_one(spec: SynthSpec, index: int) -> SynthSample:
    rng = np.random.default_rng([spec.seed, index])
    size = spec.image_size
    regions = np.zeros((size, size), dtype=np.int64)
    n_shapes = int(rng.integers(spec.min_shapes, spec.max_shapes + 1))

    bases = [float(rng.uniform(0.2, 0.8))]
    image = bases[0] + _texture(rng, size, spec)
    for k in range(1, n_shapes + 1):
        kind = spec.kinds[int(rng.integers(len(spec.kinds)))]
        mask = _RASTERIZERS[kind](rng, size)
        # Keep neighbouring regions distinguishable by mean intensity
        base = float(rng.uniform(0.2, 0.8))
        for _ in range(MAX_PLACEMENT_TRIES):
            if min(abs(base - b) for b in bases) >= 0.15:
                break
            base = float(rng.uniform(0.2, 0.8))
        bases.append(base)
        regions[mask] = k
        image = np.where(mask, base + _texture(rng, size, spec), image)

    edges, owner = region_boundaries(regions)
    consensus = annotate(edges, owner, n_shapes, spec.annotators, spec.annotator_jitter, rng)
    return SynthSample(
        image=Grid(np.clip(image, 0.0, 1.0)),
        consensus=Grid(consensus),
        edges=edges,
    )


def generate(spec: SynthSpec) -> list[SynthSample]:
    """All images described by `spec`, in index order."""
    spec.validate()
    samples = [generate_one(spec, i) for i in range(spec.num_images)]
    logger.info(f"Generated {len(samples)} synthetic images of {spec.image_size}x{spec.image_size}")
    return samples
