"""Single CART tree grown greedily (Gini for classification, variance for regression)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import GLASS_TREE, ModelHandle


@dataclass(frozen=True)
class TreeModel:
    """Flat node arrays; ``left[i] == -1`` marks a leaf.

    Routing rule: go left when ``x[feature] < threshold``, right otherwise.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, k) leaf outputs (class frequencies or means)
    n_samples: np.ndarray
    max_depth: int
    classification: bool = True

    def __post_init__(self):
        for name, dtype in (("feature", int), ("threshold", float), ("left", int), ("right", int),
                            ("n_samples", int)):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=dtype))
        object.__setattr__(self, "value", np.atleast_2d(np.asarray(self.value, dtype=float)))
        internal = self.left >= 0
        if not np.all(np.isfinite(self.threshold[internal])):
            raise ValueError("tree thresholds must be finite")
        if self.depth() > self.max_depth:
            raise ValueError("tree deeper than max_depth")

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            if self.left[node] < 0:
                best = max(best, d)
            else:
                stack.extend([(self.left[node], d + 1), (self.right[node], d + 1)])
        return best

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(x.shape[0], dtype=int)
        active = self.left[node] >= 0
        while np.any(active):
            rows = np.nonzero(active)[0]
            cur = node[rows]
            go_left = x[rows, self.feature[cur]] < self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.left[node] >= 0
        return node

    def path(self, x: np.ndarray) -> list[int]:
        node, out = 0, [0]
        while self.left[node] >= 0:
            node = self.left[node] if x[self.feature[node]] < self.threshold[node] else self.right[node]
            out.append(int(node))
        return out

    def raw(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.apply(x)].copy()

    def handle(self, n_features: int, labels=()) -> ModelHandle:
        return ModelHandle(
            task="classification" if self.classification else "regression",
            n_outputs=self.value.shape[1],
            raw_predict=self.raw,
            n_features=n_features,
            capabilities=frozenset({GLASS_TREE}),
            labels=tuple(labels),
            model=self,
        )

    def params(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(), "value": self.value.tolist(),
                "n_samples": self.n_samples.tolist(), "max_depth": self.max_depth,
                "classification": self.classification}

    @classmethod
    def from_params(cls, p) -> "TreeModel":
        return cls(p["feature"], p["threshold"], p["left"], p["right"], p["value"], p["n_samples"],
                   int(p["max_depth"]), bool(p.get("classification", True)))


def _impurity_curve(y_sorted: np.ndarray, classification: bool):
    """Weighted child impurity for every split position 1..n-1 of a sorted column."""
    n = len(y_sorted)
    left_n = np.arange(1, n)
    right_n = n - left_n
    if classification:
        csum = np.cumsum(y_sorted, axis=0)[:-1]  # y_sorted is one-hot
        rsum = y_sorted.sum(axis=0) - csum
        gini_l = 1.0 - np.sum((csum / left_n[:, None]) ** 2, axis=1)
        gini_r = 1.0 - np.sum((rsum / right_n[:, None]) ** 2, axis=1)
        return (left_n * gini_l + right_n * gini_r) / n
    ys = y_sorted[:, 0]
    c1, c2 = np.cumsum(ys)[:-1], np.cumsum(ys ** 2)[:-1]
    t1, t2 = ys.sum(), (ys ** 2).sum()
    var_l = c2 / left_n - (c1 / left_n) ** 2
    var_r = (t2 - c2) / right_n - ((t1 - c1) / right_n) ** 2
    return (left_n * np.maximum(var_l, 0) + right_n * np.maximum(var_r, 0)) / n


def _node_impurity(y: np.ndarray, classification: bool) -> float:
    if classification:
        p = y.mean(axis=0)
        return float(1.0 - np.sum(p ** 2))
    return float(np.var(y[:, 0]))


def grow_tree(x: np.ndarray, y: np.ndarray, classification: bool, max_depth: int = 6,
              min_samples_split: int = 2) -> TreeModel:
    """Greedy CART. ``y`` is one-hot for classification, a column for regression.

    A node is split while it is impure, even when the best split has zero
    gain (XOR-like targets need that first step).
    """
    feats, thrs, lefts, rights, values, counts = [], [], [], [], [], []

    def new_node(idx):
        feats.append(-1)
        thrs.append(0.0)
        lefts.append(-1)
        rights.append(-1)
        values.append(y[idx].mean(axis=0))
        counts.append(len(idx))
        return len(feats) - 1

    root = new_node(np.arange(x.shape[0]))
    stack = [(root, np.arange(x.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= max_depth or len(idx) < min_samples_split:
            continue
        if _node_impurity(y[idx], classification) <= 1e-15:
            continue
        best = None
        for j in range(x.shape[1]):
            order = np.argsort(x[idx, j], kind="stable")
            xs = x[idx[order], j]
            valid = np.nonzero(xs[1:] > xs[:-1])[0]
            if valid.size == 0:
                continue
            curve = _impurity_curve(y[idx[order]], classification)[valid]
            k = int(np.argmin(curve))
            score = float(curve[k])
            if best is None or score < best[0] - 1e-12:
                pos = valid[k]
                best = (score, j, float((xs[pos] + xs[pos + 1]) / 2.0))
        if best is None:
            continue
        _, j, thr = best
        mask = x[idx, j] < thr
        li, ri = idx[mask], idx[~mask]
        feats[node], thrs[node] = j, thr
        lnode = new_node(li)
        rnode = new_node(ri)
        lefts[node], rights[node] = lnode, rnode
        stack.append((rnode, ri, depth + 1))
        stack.append((lnode, li, depth + 1))
    return TreeModel(feats, thrs, lefts, rights, np.array(values), counts, max_depth, classification)
