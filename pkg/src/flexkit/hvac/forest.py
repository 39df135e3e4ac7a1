"""Small from-scratch random forest for binary targets.

Kept dependency-free (numpy only) so trained predictors serialize to a
plain, version-stable artifact and train bit-identically for a given
seed on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    leaf_class: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.leaf_class >= 0

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": self.leaf_class}
        return {
            "f": self.feature,
            "t": self.threshold,
            "l": self.left.to_dict(),
            "r": self.right.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "_Node":
        if "leaf" in d:
            return _Node(leaf_class=int(d["leaf"]))
        return _Node(
            feature=int(d["f"]),
            threshold=float(d["t"]),
            left=_Node.from_dict(d["l"]),
            right=_Node.from_dict(d["r"]),
        )


def _majority(y: np.ndarray) -> int:
    # Ties go to class 0 so leaves are deterministic.
    return int(y.sum() * 2 > len(y))


def _best_split(x: np.ndarray, y: np.ndarray, rows: np.ndarray, features: np.ndarray):
    """Exhaustive Gini search over midpoint thresholds of the given features."""
    n = len(rows)
    best = (np.inf, -1, 0.0)
    for f in features:
        v = x[rows, f]
        order = np.argsort(v, kind="stable")
        vs, ys = v[order], y[rows][order]
        boundary = np.flatnonzero(vs[1:] != vs[:-1])
        if boundary.size == 0:
            continue
        ones = np.cumsum(ys)
        nl = boundary + 1.0
        nr = n - nl
        ones_l = ones[boundary]
        ones_r = ones[-1] - ones_l
        p_l, p_r = ones_l / nl, ones_r / nr
        gini = (nl * 2.0 * p_l * (1.0 - p_l) + nr * 2.0 * p_r * (1.0 - p_r)) / n
        j = int(np.argmin(gini))  # first minimum: deterministic tie-break
        if gini[j] < best[0]:
            thr = (vs[boundary[j]] + vs[boundary[j] + 1]) / 2.0
            best = (float(gini[j]), int(f), float(thr))
    if best[1] < 0:
        return None
    return best


def _grow(x, y, rows, depth, max_depth, n_sub, rng) -> _Node:
    node_y = y[rows]
    ones = node_y.sum()
    if depth >= max_depth or len(rows) < 2 or ones == 0 or ones == len(rows):
        return _Node(leaf_class=_majority(node_y))

    features = np.sort(rng.choice(x.shape[1], size=n_sub, replace=False))
    found = _best_split(x, y, rows, features)
    if found is None:
        return _Node(leaf_class=_majority(node_y))
    _, f, thr = found
    mask = x[rows, f] <= thr
    if mask.all() or not mask.any():  # float-degenerate threshold
        return _Node(leaf_class=_majority(node_y))
    return _Node(
        feature=f,
        threshold=thr,
        left=_grow(x, y, rows[mask], depth + 1, max_depth, n_sub, rng),
        right=_grow(x, y, rows[~mask], depth + 1, max_depth, n_sub, rng),
    )


def _tree_predict(node: _Node, row: np.ndarray) -> int:
    while not node.is_leaf:
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.leaf_class


@dataclass
class BinaryRandomForest:
    """Bagged depth-capped trees with Gini splits over sqrt(d) features."""

    trees: list
    n_features: int
    n_trees: int
    max_depth: int
    seed: int

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        votes = np.zeros(len(x))
        for tree in self.trees:
            votes += [_tree_predict(tree, row) for row in x]
        return votes / len(self.trees)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return (self.predict_proba(x) >= 0.5).astype(int)

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "seed": self.seed,
            "trees": [t.to_dict() for t in self.trees],
        }

    @staticmethod
    def from_dict(d: dict) -> "BinaryRandomForest":
        return BinaryRandomForest(
            trees=[_Node.from_dict(t) for t in d["trees"]],
            n_features=int(d["n_features"]),
            n_trees=int(d["n_trees"]),
            max_depth=int(d["max_depth"]),
            seed=int(d["seed"]),
        )


def fit_forest(
    x: np.ndarray,
    y: np.ndarray,
    n_trees: int = 100,
    max_depth: int = 12,
    seed: int = 0,
) -> BinaryRandomForest:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y).astype(int)
    n, d = x.shape
    n_sub = max(1, round(math.sqrt(d)))
    children = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    for child in children:
        rng = np.random.default_rng(child)
        rows = rng.integers(0, n, size=n)  # bootstrap sample
        trees.append(_grow(x, y, rows, 0, max_depth, n_sub, rng))
    return BinaryRandomForest(
        trees=trees, n_features=d, n_trees=n_trees, max_depth=max_depth, seed=seed
    )
