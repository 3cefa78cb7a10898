"""Squared-error gradient boosting over exhaustive-split regression trees.

Each round fits a depth-limited tree to the current residuals. A node's split
is the (feature, threshold) pair with the smallest summed squared error of
the two children, scanning every midpoint between consecutive distinct
values of every feature. Ties go to the lowest feature index, then the
lowest threshold. Leaves predict the mean residual of their rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..errors import DataError, StateError, ValidationError

# Relative slack for treating two SSE values as equal; keeps the tie rule
# stable against last-bit differences between summation orders.
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class GbtParams:
    n_trees: int = 40
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 20

    def __post_init__(self):
        if self.n_trees < 0:
            raise ValidationError("n_trees must be >= 0")
        if self.max_depth < 1:
            raise ValidationError("max_depth must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValidationError("learning_rate must lie in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ValidationError("min_samples_leaf must be >= 1")


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    sse: float


@dataclass
class Node:
    value: float
    n: int
    feature: int | None = None
    threshold: float | None = None
    left: Node | None = None
    right: Node | None = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            yield from self.left.leaves()
            yield from self.right.leaves()

    def to_dict(self) -> dict[str, Any]:
        if self.is_leaf:
            return {"leaf": self.value, "n": self.n}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "n": self.n,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Node:
        if "leaf" in d:
            return cls(value=float(d["leaf"]), n=int(d["n"]))
        return cls(
            value=float("nan"), n=int(d["n"]), feature=int(d["feature"]),
            threshold=float(d["threshold"]),
            left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]),
        )


def predict_tree(node: Node, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    _route(node, X, np.arange(len(X)), out)
    return out


def _route(node: Node, X: np.ndarray, idx: np.ndarray, out: np.ndarray) -> None:
    if node.is_leaf:
        out[idx] = node.value
        return
    go_left = X[idx, node.feature] <= node.threshold
    _route(node.left, X, idx[go_left], out)
    _route(node.right, X, idx[~go_left], out)


def best_split(X: np.ndarray, r: np.ndarray, min_samples_leaf: int) -> Split | None:
    """Exhaustive SSE-minimizing split of rows (X, r), or None if no valid split."""
    n, p = X.shape
    if n < 2 * min_samples_leaf:
        return None
    total = r.sum()
    best: Split | None = None
    sq_total = float(np.dot(r, r))
    for j in range(p):
        order = np.argsort(X[:, j], kind="stable")
        xs, rs = X[order, j], r[order]
        left_sum = np.cumsum(rs)[:-1]
        n_left = np.arange(1, n)
        # candidate boundary i sits between xs[i-1] and xs[i]
        valid = (xs[1:] > xs[:-1]) & (n_left >= min_samples_leaf) & (n - n_left >= min_samples_leaf)
        if not valid.any():
            continue
        ls, nl = left_sum[valid], n_left[valid]
        rs_sum, nr = total - ls, n - nl
        sse = sq_total - ls * ls / nl - rs_sum * rs_sum / nr
        k = int(np.argmin(sse))
        cand_sse = float(sse[k])
        # lowest threshold among near-ties within this feature
        tol = TIE_RTOL * max(sq_total, 1.0)
        k = int(np.flatnonzero(sse <= cand_sse + tol)[0])
        cand_sse = float(sse[k])
        pos = np.flatnonzero(valid)[k]
        threshold = 0.5 * (xs[pos] + xs[pos + 1])
        if best is None or cand_sse < best.sse - tol:
            best = Split(j, float(threshold), cand_sse)
    return best


def grow_tree(X: np.ndarray, r: np.ndarray, max_depth: int, min_samples_leaf: int) -> Node:
    node = Node(value=float(np.mean(r)), n=len(r))
    if max_depth == 0:
        return node
    split = best_split(X, r, min_samples_leaf)
    if split is None:
        return node
    parent_sse = float(np.sum((r - node.value) ** 2))
    if split.sse >= parent_sse - TIE_RTOL * max(parent_sse, 1.0):
        return node
    mask = X[:, split.feature] <= split.threshold
    node.feature, node.threshold = split.feature, split.threshold
    node.left = grow_tree(X[mask], r[mask], max_depth - 1, min_samples_leaf)
    node.right = grow_tree(X[~mask], r[~mask], max_depth - 1, min_samples_leaf)
    return node


@dataclass
class GbtModel:
    base_prediction: float
    trees: list[Node]
    params: GbtParams
    n_features: int
    train_loss: list[float]

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValidationError(f"expected {self.n_features} features, got shape {X.shape}")
        out = np.full(len(X), self.base_prediction)
        for tree in self.trees:
            out += self.params.learning_rate * predict_tree(tree, X)
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "base_prediction": self.base_prediction,
            "params": {
                "n_trees": self.params.n_trees,
                "max_depth": self.params.max_depth,
                "learning_rate": self.params.learning_rate,
                "min_samples_leaf": self.params.min_samples_leaf,
            },
            "n_features": self.n_features,
            "train_loss": self.train_loss,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> GbtModel:
        return cls(
            base_prediction=float(d["base_prediction"]),
            trees=[Node.from_dict(t) for t in d["trees"]],
            params=GbtParams(**d["params"]),
            n_features=int(d["n_features"]),
            train_loss=[float(v) for v in d.get("train_loss", [])],
        )


def fit_gbt(X: np.ndarray, y: np.ndarray, params: GbtParams = GbtParams()) -> GbtModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValidationError(f"X {X.shape} and y {y.shape} do not align")
    if len(y) < 2 * params.min_samples_leaf:
        raise DataError(f"need at least {2 * params.min_samples_leaf} rows, got {len(y)}")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise DataError("features and targets must be finite")
    base = float(np.mean(y))
    if np.all(y == y[0]):
        return GbtModel(float(y[0]), [], params, X.shape[1], [0.0])
    pred = np.full(len(y), base)
    losses = [float(np.mean((y - pred) ** 2))]
    trees = []
    for _ in range(params.n_trees):
        tree = grow_tree(X, y - pred, params.max_depth, params.min_samples_leaf)
        if tree.is_leaf and abs(tree.value) <= 1e-15 * max(1.0, abs(base)):
            break  # nothing left to fit
        trees.append(tree)
        pred = pred + params.learning_rate * predict_tree(tree, X)
        losses.append(float(np.mean((y - pred) ** 2)))
    return GbtModel(base, trees, params, X.shape[1], losses)


def require_fitted(model) -> None:
    if model is None or not hasattr(model, "predict"):
        raise StateError("closure model is not fitted")


def is_finite(x: float) -> bool:
    return math.isfinite(x)
