"""ID3-style decision tree over real features.

Splits are binary ``x[f] <= threshold`` tests with thresholds at midpoints
between consecutive distinct values, chosen by information gain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import ArityMismatch, EmptyDataset
from .dataset import Dataset


@dataclass(frozen=True)
class Leaf:
    label: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Node"
    right: "Node"


Node = Union[Leaf, Split]


@dataclass(frozen=True)
class DecisionTree:
    root: Node
    n_features: int
    n_classes: int

    @property
    def depth(self) -> int:
        def walk(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(self.root)


def entropy(counts: np.ndarray) -> np.ndarray:
    """Entropy in bits along the last axis of a count array."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(total > 0, counts / total, 0.0)
        terms = np.where(p > 0, -p * np.log2(p), 0.0)
    return terms.sum(axis=-1)


def best_split(X: np.ndarray, y: np.ndarray, n_classes: int):
    """Return ``(gain, feature, threshold)`` of the best admissible split, or None.

    Ties keep the lowest feature index, then the lowest threshold.
    """
    n = len(y)
    onehot = np.eye(n_classes)[y]
    parent = entropy(onehot.sum(axis=0))
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cuts = np.nonzero(xs[:-1] < xs[1:])[0]
        if len(cuts) == 0:
            continue
        left = np.cumsum(onehot[order], axis=0)[cuts]
        right = onehot.sum(axis=0) - left
        n_left = cuts + 1.0
        child = (n_left * entropy(left) + (n - n_left) * entropy(right)) / n
        gains = parent - child
        i = int(np.argmax(gains))
        gain = float(gains[i])
        if best is None or gain > best[0] + 1e-12:
            best = (gain, f, float((xs[cuts[i]] + xs[cuts[i] + 1]) / 2.0))
    return best


def _majority(y: np.ndarray, n_classes: int) -> int:
    return int(np.argmax(np.bincount(y, minlength=n_classes)))


def _grow(X, y, depth, max_depth, n_classes) -> Node:
    label = _majority(y, n_classes)
    if np.all(y == y[0]) or (max_depth is not None and depth >= max_depth):
        return Leaf(label)
    split = best_split(X, y, n_classes)
    if split is None:
        return Leaf(label)
    _, f, thr = split
    go_left = X[:, f] <= thr
    return Split(
        f,
        thr,
        _grow(X[go_left], y[go_left], depth + 1, max_depth, n_classes),
        _grow(X[~go_left], y[~go_left], depth + 1, max_depth, n_classes),
    )


def dt_train(data: Dataset, max_depth: int | None = None) -> DecisionTree:
    if len(data) == 0:
        raise EmptyDataset("cannot grow a tree on zero rows")
    root = _grow(data.features, data.labels, 0, max_depth, data.n_classes)
    return DecisionTree(root, data.arity, data.n_classes)


def dt_predict(tree: DecisionTree, x) -> int:
    x = np.asarray(x, dtype=float)
    if x.shape != (tree.n_features,):
        raise ArityMismatch(f"expected {tree.n_features} features, got {x.shape}")
    node = tree.root
    while isinstance(node, Split):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.label


def tree_to_dict(tree: DecisionTree) -> dict:
    def enc(node):
        if isinstance(node, Leaf):
            return {"label": node.label}
        return {"feature": node.feature, "threshold": node.threshold, "left": enc(node.left), "right": enc(node.right)}

    return {"n_features": tree.n_features, "n_classes": tree.n_classes, "root": enc(tree.root)}


def tree_from_dict(data: dict) -> DecisionTree:
    def dec(d):
        if "label" in d:
            return Leaf(int(d["label"]))
        return Split(int(d["feature"]), float(d["threshold"]), dec(d["left"]), dec(d["right"]))

    return DecisionTree(dec(data["root"]), int(data["n_features"]), int(data["n_classes"]))
