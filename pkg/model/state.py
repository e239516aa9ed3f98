"""
Model parameters, optimizer slots, initialization and the model file.

File layout (all integers little-endian u32, all reals little-endian f64):

    b"CATSMDL1"
    u32 architecture JSON length, UTF-8 JSON bytes
    u32 epoch
    u32 parameter count
    per parameter, in declaration order:
        u32 name length, UTF-8 name, u32 height, u32 width, u32 channels,
        height*width*channels reals
    per parameter, same order: height*width*channels momentum reals
"""

from __future__ import annotations

import io
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from autodiff import Grid, Kernel, Node
from model.edgenet import EdgeNetConfig
from model.rng import XorShift64Star
from utils.config import atomic_write_bytes

logger = logging.getLogger(__name__)

MAGIC = b"CATSMDL1"


@dataclass(frozen=True)
class ParamSpec:
    name: str
    shape: tuple[int, int, int]
    init: str  # "normal", "zero" or "uniform_sides"


def parameter_layout(cfg: EdgeNetConfig) -> list[ParamSpec]:
    """Parameters in declaration order: backbone and heads first, then fusion."""
    layout: list[ParamSpec] = []

    def conv(prefix: str, k: int, cin: int, cout: int) -> None:
        layout.append(ParamSpec(f"{prefix}.weight", (k, k, cin * cout), "normal"))
        layout.append(ParamSpec(f"{prefix}.bias", (1, 1, cout), "zero"))

    cin = cfg.in_channels
    for s in range(1, cfg.stages + 1):
        width = cfg.stage_channels(s)
        for j in range(1, cfg.convs_per_stage + 1):
            conv(f"stage{s}.conv{j}", 3, cin, width)
            cin = width
        conv(f"stage{s}.head", 1, width, 1)

    sides = cfg.stages
    if cfg.fusion_mode == "cofusion":
        conv("fusion.conv1", 3, sides, cfg.mid_channels)
        conv("fusion.conv2", 3, cfg.mid_channels, cfg.mid_channels)
        conv("fusion.conv3", 3, cfg.mid_channels, sides)
    else:
        layout.append(ParamSpec("fusion.weight", (1, 1, sides), "uniform_sides"))
    return layout


@dataclass
class ModelState:
    """Trainable parameters (ordered), epochs completed, momentum buffers."""

    arch: dict
    params: dict[str, Node]
    epoch: int = 0
    momentum: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, node in self.params.items():
            if name not in self.momentum:
                self.momentum[name] = np.zeros(node.shape)

    @property
    def config(self) -> EdgeNetConfig:
        return EdgeNetConfig.from_architecture(self.arch)

    def parameters(self) -> list[Node]:
        return list(self.params.values())

    def kernel(self, prefix: str) -> Kernel:
        """Kernel view over `{prefix}.weight` / `{prefix}.bias`."""
        weight = self.params[f"{prefix}.weight"]
        bias = self.params[f"{prefix}.bias"]
        cout = bias.shape[2]
        return Kernel(weight=weight, bias=bias, in_channels=weight.shape[2] // cout, out_channels=cout)

    def zero_grad(self) -> None:
        for node in self.params.values():
            node.zero_grad()

    def copy(self) -> ModelState:
        return ModelState(
            arch=dict(self.arch),
            params={name: Node.leaf(node.value, name=name) for name, node in self.params.items()},
            epoch=self.epoch,
            momentum={name: buf.copy() for name, buf in self.momentum.items()},
        )


def init_params(net_cfg: EdgeNetConfig, seed: int) -> ModelState:
    """
    Fresh ModelState: conv weights ~ N(0, init_sigma^2) drawn in declaration
    order from XorShift64Star(seed), biases 0, fixed-fusion weights 1/L.
    """
    rng = XorShift64Star(seed)
    params: dict[str, Node] = {}
    for spec in parameter_layout(net_cfg):
        if spec.init == "normal":
            value = rng.normal_array(spec.shape, net_cfg.init_sigma)
        elif spec.init == "uniform_sides":
            value = np.full(spec.shape, 1.0 / spec.shape[2])
        else:
            value = np.zeros(spec.shape)
        params[spec.name] = Node.leaf(Grid(value), name=spec.name)
    logger.debug(f"initialized {len(params)} parameter grids (seed={seed})")
    return ModelState(arch=net_cfg.architecture(), params=params)


# =============================================================================
# Serialization
# =============================================================================


def encode_state(state: ModelState) -> bytes:
    buf = io.BytesIO()
    arch = json.dumps(state.arch, sort_keys=True).encode("utf-8")
    buf.write(MAGIC)
    buf.write(struct.pack("<I", len(arch)))
    buf.write(arch)
    buf.write(struct.pack("<II", state.epoch, len(state.params)))
    for name, node in state.params.items():
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<I", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<III", *node.shape))
        buf.write(node.data.astype("<f8").tobytes())
    for name in state.params:
        buf.write(state.momentum[name].astype("<f8").tobytes())
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise ValueError(f"model file truncated at byte {self.offset} (needed {n} more)")
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def u32(self, count: int = 1) -> tuple[int, ...]:
        return struct.unpack(f"<{count}I", self.take(4 * count))

    def reals(self, shape: tuple[int, int, int]) -> np.ndarray:
        n = shape[0] * shape[1] * shape[2]
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)


def decode_state(data: bytes) -> ModelState:
    reader = _Reader(data)
    if reader.take(len(MAGIC)) != MAGIC:
        raise ValueError("not a model file (bad magic)")
    (arch_len,) = reader.u32()
    arch = json.loads(reader.take(arch_len).decode("utf-8"))
    epoch, count = reader.u32(2)
    params: dict[str, Node] = {}
    for _ in range(count):
        (name_len,) = reader.u32()
        name = reader.take(name_len).decode("utf-8")
        shape = reader.u32(3)
        params[name] = Node.leaf(Grid(reader.reals(shape)), name=name)
    momentum = {name: reader.reals(node.shape) for name, node in params.items()}
    if reader.offset != len(data):
        raise ValueError(f"{len(data) - reader.offset} trailing bytes after model payload")

    expected = [spec.name for spec in parameter_layout(EdgeNetConfig.from_architecture(arch))]
    if list(params) != expected:
        raise ValueError("model file parameters do not match its recorded architecture")
    return ModelState(arch=arch, params=params, epoch=epoch, momentum=momentum)


def save_state(state: ModelState, path: str | Path) -> None:
    atomic_write_bytes(path, encode_state(state))
    logger.info(f"Wrote model ({len(state.params)} grids, epoch {state.epoch}) to {path}")


def load_state(path: str | Path) -> ModelState:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Model file not found: {path}")
    return decode_state(path.read_bytes())
