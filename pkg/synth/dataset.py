"""
Dataset directories:

    images/NNNN.pgm    input images
    labels/NNNN.pgm    consensus maps (x255)
    manifest.json      generating spec, seed and image count
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from autodiff import Grid
from synth.generator import SynthSample, SynthSpec
from synth.pgm import read_pgm, write_pgm
from utils.config import write_json

logger = logging.getLogger(__name__)

IMAGES_DIR = "images"
LABELS_DIR = "labels"
MANIFEST = "manifest.json"


@dataclass
class DatasetItem:
    name: str
    image: Grid
    consensus: Grid | None


def sample_name(index: int) -> str:
    return f"{index:04d}"


def write_dataset(samples: list[SynthSample], spec: SynthSpec, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    (out / IMAGES_DIR).mkdir(parents=True, exist_ok=True)
    (out / LABELS_DIR).mkdir(parents=True, exist_ok=True)
    for i, sample in enumerate(samples):
        write_pgm(sample.image, out / IMAGES_DIR / f"{sample_name(i)}.pgm")
        write_pgm(sample.consensus, out / LABELS_DIR / f"{sample_name(i)}.pgm")
    write_json(out / MANIFEST, {"count": len(samples), "seed": spec.seed, "spec": spec.to_dict()})
    logger.info(f"Wrote {len(samples)} images to {out}")
    return out


def read_manifest(data_dir: str | Path) -> dict:
    path = Path(data_dir) / MANIFEST
    if not path.exists():
        raise FileNotFoundError(f"Dataset manifest not found: {path}")
    with open(path) as f:
        return json.load(f)


def list_maps(directory: str | Path) -> list[Path]:
    """PGM files of a directory, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"Directory not found: {directory}")
    return sorted(directory.glob("*.pgm"))


def load_dataset(data_dir: str | Path, with_labels: bool = True) -> list[DatasetItem]:
    """
    Read every image (and its consensus map) of a dataset directory.

    Raises:
        FileNotFoundError: missing images/ directory or a label for an image
        ValueError: the directory holds no images
    """
    root = Path(data_dir)
    paths = list_maps(root / IMAGES_DIR)
    if not paths:
        raise ValueError(f"No images in {root / IMAGES_DIR}")
    items = []
    for path in paths:
        consensus = None
        if with_labels:
            label_path = root / LABELS_DIR / path.name
            if not label_path.exists():
                raise FileNotFoundError(f"Label missing for {path.name}: {label_path}")
            consensus = read_pgm(label_path)
        items.append(DatasetItem(name=path.stem, image=read_pgm(path), consensus=consensus))
    logger.debug(f"Loaded {len(items)} items from {root}")
    return items
