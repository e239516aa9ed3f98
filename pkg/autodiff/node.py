"""
Reverse-mode differentiation over Grid values.

A Node holds a Grid value, a gradient buffer of the same shape, and the
parents it was computed from. Each parent is paired with a local-gradient
rule that maps the node's upstream gradient to that parent's contribution.

Example:
    x = Node.leaf(Grid([[2.0]]))
    y = ops.sum_all(ops.multiply(x, x))
    backward(y)
    x.grad  # [[[4.0]]]
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from autodiff.grid import Grid

# Upstream gradient -> contribution to one parent
GradRule = Callable[[np.ndarray], np.ndarray]


class Node:
    """A differentiable Grid value with recorded parents."""

    __slots__ = ("value", "grad", "parents", "requires_grad", "name", "_backward_done")

    def __init__(
        self,
        value: Grid,
        parents: Iterable[tuple[Node, GradRule]] = (),
        requires_grad: bool = False,
        name: str | None = None,
    ):
        if not isinstance(value, Grid):
            value = Grid(value)
        self.value = value
        # Only parents that need gradients are kept
        self.parents: tuple[tuple[Node, GradRule], ...] = tuple(
            (p, rule) for p, rule in parents if p.requires_grad
        )
        self.requires_grad = requires_grad or bool(self.parents)
        self.grad: np.ndarray | None = (
            np.zeros(value.shape) if self.requires_grad else None
        )
        self.name = name
        self._backward_done = False

    @classmethod
    def leaf(cls, value: Grid | np.ndarray, name: str | None = None) -> Node:
        """Trainable leaf (parameter or input under test)."""
        return cls(value if isinstance(value, Grid) else Grid(value), requires_grad=True, name=name)

    @classmethod
    def constant(cls, value: Grid | np.ndarray | float, name: str | None = None) -> Node:
        if isinstance(value, (int, float)):
            value = Grid.scalar(value)
        return cls(value if isinstance(value, Grid) else Grid(value), name=name)

    @property
    def data(self) -> np.ndarray:
        return self.value.data

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.value.shape

    def item(self) -> float:
        return self.value.item()

    def set_value(self, value: Grid) -> None:
        """Replace a leaf's value (optimizer updates)."""
        if self.parents:
            raise RuntimeError("only leaf nodes can be reassigned")
        if value.shape != self.value.shape:
            raise ValueError(f"shape change {self.value.shape} -> {value.shape} on '{self.name}'")
        self.value = value

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self) -> str:
        label = f" '{self.name}'" if self.name else ""
        return f"Node{label}(shape={self.shape}, requires_grad={self.requires_grad})"


def topological_order(root: Node) -> list[Node]:
    """Nodes reachable from root, parents before children (iterative DFS)."""
    order: list[Node] = []
    visited: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        # Reversed so parents are visited in declaration order
        for parent, _ in reversed(node.parents):
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(root: Node) -> None:
    """
    Propagate d(root)/d(node) into the grad buffer of every reachable node.

    Leaf gradients accumulate across graphs, so summing per-sample losses is
    a matter of calling backward on each sample's root in turn.

    Raises:
        ValueError: root is not a scalar
        RuntimeError: backward already ran on this root without zero_grad()
    """
    if root.value.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.shape}")
    if root._backward_done:
        raise RuntimeError("backward already ran on this graph; call zero_grad(root) first")
    root._backward_done = True
    if not root.requires_grad:
        return

    order = topological_order(root)
    root.grad += 1.0
    for node in reversed(order):
        for parent, rule in node.parents:
            parent.grad += rule(node.grad)


def zero_grad(root: Node) -> None:
    """Reset every gradient buffer reachable from root and re-arm backward."""
    for node in topological_order(root):
        node.zero_grad()
    root._backward_done = False
