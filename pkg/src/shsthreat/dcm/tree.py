"""CART decision tree with Gini split selection."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..data import Dataset
from ..errors import DimensionMismatch, EmptyDataset


@dataclass(frozen=True)
class TreeNode:
    """Internal node (``attr``/``threshold``/children) or leaf (``label``)."""

    attr: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    label: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.label is not None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf_label": self.label}
        return {"attr": self.attr, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "leaf_label" in d:
            return cls(label=int(d["leaf_label"]))
        return cls(attr=int(d["attr"]), threshold=float(d["threshold"]),
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]))


# one edge of a root-to-leaf path: (sensor, threshold, went_left)
Rule = tuple[int, float, bool]


@dataclass(frozen=True, eq=False)
class DecisionTreeModel:
    root: TreeNode
    n_s: int
    n_l: int

    kind = "dt"

    def predict(self, P) -> int:
        P = np.asarray(P, dtype=float)
        if P.shape != (self.n_s,):
            raise DimensionMismatch(f"expected {self.n_s} measurements, got {P.shape}")
        node = self.root
        while not node.is_leaf:
            node = node.left if P[node.attr] <= node.threshold else node.right
        return node.label

    def predict_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.n_s)
        out = np.empty(len(X), dtype=np.int64)
        stack = [(self.root, np.arange(len(X)))]
        while stack:
            node, idx = stack.pop()
            if len(idx) == 0:
                continue
            if node.is_leaf:
                out[idx] = node.label
                continue
            go_left = X[idx, node.attr] <= node.threshold
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
        return out

    def paths(self) -> list[tuple[list[Rule], int]]:
        """Every root-to-leaf path as its list of rules plus the leaf label."""
        out = []

        def walk(node, rules):
            if node.is_leaf:
                out.append((rules, node.label))
                return
            walk(node.left, rules + [(node.attr, node.threshold, True)])
            walk(node.right, rules + [(node.attr, node.threshold, False)])

        walk(self.root, [])
        return out

    def thresholds(self) -> list[tuple[int, float]]:
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                out.append((node.attr, node.threshold))
                stack += [node.left, node.right]
        return out

    @property
    def depth(self) -> int:
        def d(node):
            return 0 if node.is_leaf else 1 + max(d(node.left), d(node.right))
        return d(self.root)

    @property
    def n_leaves(self) -> int:
        return len(self.paths())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_s": self.n_s, "n_l": self.n_l, "root": self.root.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTreeModel":
        return cls(TreeNode.from_dict(d["root"]), int(d["n_s"]), int(d["n_l"]))


def _majority(y, n_l):
    return int(np.argmax(np.bincount(y, minlength=n_l)))  # lowest label on ties


def train_dt(train: Dataset, max_depth: int | None = 8, min_leaf_size: int = 5) -> DecisionTreeModel:
    """Greedy CART growth minimising weighted Gini impurity.

    Ties between equally good splits go to the lowest sensor index, then the
    lowest threshold. Candidate thresholds are midpoints between consecutive
    distinct values.
    """
    if len(train) == 0:
        raise EmptyDataset("cannot train a tree on an empty dataset")
    X, y = train.X, train.y
    n_l = train.schema.n_l
    min_leaf = max(1, int(min_leaf_size))

    def grow(idx, depth):
        yy = y[idx]
        label = _majority(yy, n_l)
        if np.all(yy == yy[0]) or (max_depth is not None and depth >= max_depth) or len(idx) < 2 * min_leaf:
            return TreeNode(label=label)
        best = (np.inf, None, None)
        for a in range(X.shape[1]):
            order = np.argsort(X[idx, a], kind="stable")
            xs = X[idx[order], a]
            score, thr, _ = kernels.gini_best_split(xs, yy[order], n_l, min_leaf)
            if score < best[0]:
                best = (score, a, thr)
        if best[1] is None:
            return TreeNode(label=label)
        _, a, thr = best
        go_left = X[idx, a] <= thr
        return TreeNode(attr=int(a), threshold=float(thr),
                        left=grow(idx[go_left], depth + 1), right=grow(idx[~go_left], depth + 1))

    root = grow(np.arange(len(train)), 0)
    return DecisionTreeModel(_prune_same_label(root), train.schema.n_s, n_l)


def _prune_same_label(node: TreeNode) -> TreeNode:
    """Collapse internal nodes whose subtrees all predict one label (same function, smaller tree)."""
    if node.is_leaf:
        return node
    left = _prune_same_label(node.left)
    right = _prune_same_label(node.right)
    if left.is_leaf and right.is_leaf and left.label == right.label:
        return TreeNode(label=left.label)
    return TreeNode(attr=node.attr, threshold=node.threshold, left=left, right=right)
