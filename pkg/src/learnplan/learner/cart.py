"""CART regression tree over binary options (greedy SSE reduction, no pruning)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

DEFAULT_MAX_DEPTH = 12
DEFAULT_MIN_LEAF = 2


@dataclass(frozen=True)
class Leaf:
    mean: float
    count: int


@dataclass(frozen=True)
class Split:
    option: int
    left: "Node"  # option bit 0
    right: "Node"  # option bit 1


Node = Union[Leaf, Split]


@dataclass(frozen=True)
class CartTree:
    dimension: int
    root: Node

    def predict(self, config: Sequence[int]) -> float:
        if len(config) != self.dimension:
            raise ValueError(f"configuration has {len(config)} options, tree expects {self.dimension}")
        node = self.root
        while isinstance(node, Split):
            node = node.right if config[node.option] else node.left
        return node.mean

    def predict_many(self, configs: np.ndarray) -> np.ndarray:
        X = np.asarray(configs)
        if X.ndim != 2 or X.shape[1] != self.dimension:
            raise ValueError(f"expected an (n, {self.dimension}) configuration matrix, got {X.shape}")
        out = np.empty(X.shape[0])
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if isinstance(node, Leaf):
                out[rows] = node.mean
                continue
            bit = X[rows, node.option].astype(bool)
            stack.append((node.left, rows[~bit]))
            stack.append((node.right, rows[bit]))
        return out

    def leaves(self) -> list[Leaf]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                out.append(node)
            else:
                stack.extend((node.right, node.left))
        return out

    def depth(self) -> int:
        def walk(node):
            return 0 if isinstance(node, Leaf) else 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)


def _sse(y: np.ndarray) -> float:
    return float(((y - y.mean()) ** 2).sum()) if len(y) else 0.0


def _best_split(X: np.ndarray, y: np.ndarray, used: frozenset, min_leaf: int):
    parent = _sse(y)
    best = None
    for j in range(X.shape[1]):
        if j in used:
            continue
        mask = X[:, j].astype(bool)
        n1 = int(mask.sum())
        n0 = len(y) - n1
        if n0 < min_leaf or n1 < min_leaf:
            continue
        gain = parent - _sse(y[~mask]) - _sse(y[mask])
        # strict improvement keeps the lowest option index on ties
        if gain > 1e-12 * max(parent, 1e-300) and (best is None or gain > best[1]):
            best = (j, gain)
    return best


def _grow(X, y, depth, max_depth, min_leaf, used) -> Node:
    leaf = Leaf(float(y.mean()), len(y))
    if depth >= max_depth or len(y) < 2 * min_leaf:
        return leaf
    best = _best_split(X, y, used, min_leaf)
    if best is None:
        return leaf
    j = best[0]
    mask = X[:, j].astype(bool)
    used = used | {j}
    return Split(
        j,
        _grow(X[~mask], y[~mask], depth + 1, max_depth, min_leaf, used),
        _grow(X[mask], y[mask], depth + 1, max_depth, min_leaf, used),
    )


def fit_cart(obs, max_depth: int = DEFAULT_MAX_DEPTH, min_leaf: int = DEFAULT_MIN_LEAF) -> CartTree:
    """Grow a regression tree on observations (sequence of ``Observation``)."""
    if len(obs) < max(min_leaf, 1):
        raise ValueError(f"need at least {min_leaf} observations")
    X = np.array([o.config for o in obs], dtype=np.uint8)
    y = np.array([o.value for o in obs], dtype=float)
    return CartTree(X.shape[1], _grow(X, y, 0, max_depth, min_leaf, frozenset()))
