"""Synthetic shape dataset, annotator simulation and PGM I/O."""

from .generator import SynthSample, SynthSpec, generate, generate_one
from .pgm import decode_pgm, encode_pgm, read_pgm, write_pgm
from .dataset import DatasetItem, load_dataset, read_manifest, write_dataset

__all__ = [
    "SynthSample",
    "SynthSpec",
    "generate",
    "generate_one",
    "decode_pgm",
    "encode_pgm",
    "read_pgm",
    "write_pgm",
    "DatasetItem",
    "load_dataset",
    "read_manifest",
    "write_dataset",
]
