"""
Netpbm graymap I/O.

Writes binary P5 with maxval 255; values are quantized round-half-up,
q = floor(v * 255 + 0.5). Reads P5 (8- or 16-bit) and ASCII P2 and returns
values scaled to [0, 1]. Header defects and short payloads raise ValueError
naming the byte offset.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from autodiff import Grid
from utils.config import atomic_write_bytes

_WHITESPACE = b" \t\n\r\v\f"


def quantize(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] reals to 0..255."""
    return np.floor(np.asarray(values, dtype=np.float64) * 255.0 + 0.5).astype(np.uint8)


def encode_pgm(grid: Grid) -> bytes:
    if grid.channels != 1:
        raise ValueError(f"PGM needs a single-channel grid, got {grid.channels} channels")
    plane = grid.plane()
    if plane.min() < 0.0 or plane.max() > 1.0:
        raise ValueError("PGM values must lie in [0, 1]")
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    return header + quantize(plane).tobytes()


def write_pgm(grid: Grid, path: str | Path) -> None:
    atomic_write_bytes(path, encode_pgm(grid))


class _HeaderReader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def skip_space(self) -> None:
        while self.offset < len(self.data):
            ch = self.data[self.offset : self.offset + 1]
            if ch == b"#":
                end = self.data.find(b"\n", self.offset)
                self.offset = len(self.data) if end < 0 else end + 1
            elif ch in _WHITESPACE:
                self.offset += 1
            else:
                break

    def integer(self, what: str) -> int:
        self.skip_space()
        start = self.offset
        while self.offset < len(self.data) and self.data[self.offset : self.offset + 1].isdigit():
            self.offset += 1
        if self.offset == start:
            raise ValueError(f"PGM: expected {what} at byte {start}")
        return int(self.data[start : self.offset])


def decode_pgm(data: bytes) -> Grid:
    """Parse P5 or P2 bytes."""
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise ValueError(f"PGM: bad magic {magic!r} at byte 0")
    reader = _HeaderReader(data)
    reader.offset = 2
    width = reader.integer("width")
    height = reader.integer("height")
    maxval = reader.integer("maxval")
    if width < 1 or height < 1:
        raise ValueError(f"PGM: empty image {width}x{height}")
    if not 0 < maxval < 65536:
        raise ValueError(f"PGM: maxval {maxval} out of range before byte {reader.offset}")
    count = width * height

    if magic == b"P5":
        if reader.offset >= len(data) or data[reader.offset : reader.offset + 1] not in _WHITESPACE:
            raise ValueError(f"PGM: missing whitespace after maxval at byte {reader.offset}")
        start = reader.offset + 1
        sample = 1 if maxval < 256 else 2
        end = start + count * sample
        if end > len(data):
            raise ValueError(
                f"PGM: payload truncated at byte {len(data)} (expected {end - start} bytes from byte {start})"
            )
        dtype = np.uint8 if sample == 1 else np.dtype(">u2")
        raw = np.frombuffer(data[start:end], dtype=dtype).astype(np.float64)
    else:
        values = []
        for _ in range(count):
            reader.skip_space()
            if reader.offset >= len(data):
                raise ValueError(f"PGM: payload truncated at byte {reader.offset}")
            values.append(reader.integer("sample"))
        raw = np.asarray(values, dtype=np.float64)

    if raw.max(initial=0.0) > maxval:
        raise ValueError(f"PGM: sample exceeds maxval {maxval}")
    return Grid(raw.reshape(height, width) / maxval)


def read_pgm(path: str | Path) -> Grid:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"PGM file not found: {path}")
    return decode_pgm(path.read_bytes())
