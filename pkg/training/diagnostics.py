"""
Finite-difference gradient suite over every differentiable component:
the three loss terms, their combination, the CoFusion block and the
edge network end to end.
"""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np

from autodiff import GradCheckResult, Grid, Kernel, Node, check_gradients, ops
from losses import EdgeLabel, TracingConfig, derive_label, loss_bdry, loss_ce, loss_tex, tracing_loss
from losses.tracing import texture_centers
from model.cofusion import CoFusionParams, SidePack, cofusion_forward
from model.edgenet import EdgeNetConfig, forward, total_loss
from model.state import init_params

logger = logging.getLogger(__name__)

CHECK_DELTA = 0.3
CHECK_K_BDRY = 3
CHECK_SIGMA = 0.5


def random_label(rng: np.random.Generator, size: int, delta: float = CHECK_DELTA, k_bdry: int = CHECK_K_BDRY) -> EdgeLabel:
    """
    Random consensus with positives, a delta band, and at least one texture
    center. Requires size >= k_bdry + 2.
    """
    y = rng.choice([0.0, 0.2, 0.6, 1.0], size=(size, size), p=[0.75, 0.1, 0.05, 0.1])
    y[1, 1] = 1.0
    y[-1, -1] = 0.0
    label = derive_label(Grid(y), delta, k_bdry)
    if not texture_centers(label).any():
        y[y > delta] = 0.0
        y[1, 1] = 1.0
        label = derive_label(Grid(y), delta, k_bdry)
    return label


def random_pred(rng: np.random.Generator, size: int) -> Node:
    return Node.leaf(Grid(rng.uniform(0.05, 0.95, size=(size, size))), name="pred")


def _random_kernel(rng: np.random.Generator, k: int, cin: int, cout: int, name: str) -> Kernel:
    return Kernel.create(
        rng.normal(0.0, CHECK_SIGMA, size=(k, k, cin, cout)),
        rng.normal(0.0, CHECK_SIGMA, size=cout),
        name=name,
    )


def _loss_checks(rng: np.random.Generator, size: int) -> list[GradCheckResult]:
    label = random_label(rng, size)
    pred = random_pred(rng, size)
    cfg = TracingConfig(lam=1.1, lambda1=4.0, lambda2=0.05, k_bdry=CHECK_K_BDRY, k_tex=3)
    cases: list[tuple[str, Callable[[], Node]]] = [
        ("loss_ce", lambda: loss_ce(pred, label, cfg.lam, cfg.epsilon)),
        ("loss_bdry", lambda: loss_bdry(pred, label, cfg.k_bdry, cfg.epsilon)),
        ("loss_tex", lambda: loss_tex(pred, label, cfg.k_tex, cfg.epsilon)),
        ("tracing_loss", lambda: tracing_loss(pred, label, cfg)),
    ]
    return [check_gradients(name, fn, [pred]) for name, fn in cases]


def _cofusion_check(rng: np.random.Generator, size: int, sides: int = 3, mid: int = 4) -> GradCheckResult:
    label = random_label(rng, size)
    side_nodes = [
        Node.leaf(Grid(rng.normal(0.0, 1.0, size=(size, size))), name=f"side{i + 1}")
        for i in range(sides)
    ]
    params = CoFusionParams(
        conv1=_random_kernel(rng, 3, sides, mid, "fusion.conv1"),
        conv2=_random_kernel(rng, 3, mid, mid, "fusion.conv2"),
        conv3=_random_kernel(rng, 3, mid, sides, "fusion.conv3"),
    )
    cfg = TracingConfig(lam=1.1, lambda1=2.0, lambda2=0.1, k_bdry=CHECK_K_BDRY)

    def fn() -> Node:
        fused, _ = cofusion_forward(SidePack(side_nodes), params)
        return tracing_loss(ops.sigmoid(fused), label, cfg)

    return check_gradients(
        "cofusion", fn, [*side_nodes, *params.parameters()], max_entries=24, rng=rng, allow_kinks=True
    )


def _edgenet_check(rng: np.random.Generator, size: int, fusion_mode: str, seed: int) -> GradCheckResult:
    level = TracingConfig(lam=1.1, lambda1=2.0, lambda2=0.05, k_bdry=CHECK_K_BDRY)
    cfg = EdgeNetConfig(
        stages=2,
        convs_per_stage=1,
        base_channels=2,
        fusion_mode=fusion_mode,
        mid_channels=4,
        init_sigma=CHECK_SIGMA,
        level_groups={1: level, 2: level},
        final_loss=TracingConfig(lam=1.1, lambda1=4.0, lambda2=0.05, k_bdry=CHECK_K_BDRY),
    )
    state = init_params(cfg, seed)
    image = Grid(rng.uniform(0.0, 1.0, size=(size, size)))
    label = random_label(rng, size)

    def fn() -> Node:
        pack, final_logit = forward(image, state, cfg)
        return total_loss(pack, final_logit, label, cfg)

    return check_gradients(
        f"edgenet_{fusion_mode}", fn, state.parameters(), max_entries=12, rng=rng, allow_kinks=True
    )


def run_gradcheck_suite(seed: int = 0, size: int = 8) -> list[GradCheckResult]:
    """
    Run every component check on random size x size inputs.

    Raises:
        ValueError: size too small for the 3x3 boundary patches
    """
    if size < CHECK_K_BDRY + 2:
        raise ValueError(f"gradcheck size must be >= {CHECK_K_BDRY + 2}, got {size}")
    rng = np.random.default_rng(seed)
    results = _loss_checks(rng, size)
    results.append(_cofusion_check(rng, size))
    for mode in ("fixed", "cofusion"):
        results.append(_edgenet_check(rng, size, mode, seed))
    for r in results:
        status = "ok" if r.passed else "FAIL"
        logger.info(
            f"gradcheck {r.name:<16} max_rel_error={r.max_rel_error:.3e} "
            f"checked={r.checked} skipped={r.skipped} {status}"
        )
    return results
