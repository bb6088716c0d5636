"""CART regression trees with variance-reduction splits.

Numeric features split on thresholds (exhaustive over sorted unique values);
categorical features split on level subsets found via target-mean ordering.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractError

_NO_FEATURE = -1


class RegressionTree:
    """A fitted tree stored as parallel node arrays.

    For node i: feature[i] == -1 marks a leaf with prediction value[i];
    otherwise rows go left when x <= threshold[i] (numeric) or when the level
    is in left_levels[i] (categorical).
    """

    def __init__(self):
        self.feature = []
        self.threshold = []
        self.left_levels = []   # tuple of levels, or None for numeric splits
        self.children = []      # (left, right) node ids
        self.value = []

    def n_nodes(self):
        return len(self.feature)

    def _add_node(self):
        self.feature.append(_NO_FEATURE)
        self.threshold.append(0.0)
        self.left_levels.append(None)
        self.children.append((-1, -1))
        self.value.append(0.0)
        return len(self.feature) - 1

    def used_features(self) -> set:
        return {f for f in self.feature if f != _NO_FEATURE}

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if rows.size == 0:
                continue
            f = self.feature[node]
            if f == _NO_FEATURE:
                out[rows] = self.value[node]
                continue
            if self.left_levels[node] is None:
                go_left = X[rows, f] <= self.threshold[node]
            else:
                go_left = np.isin(X[rows, f], self.left_levels[node])
            left, right = self.children[node]
            stack.append((left, rows[go_left]))
            stack.append((right, rows[~go_left]))
        return out

    def to_json_dict(self) -> dict:
        return {
            "feature": list(self.feature),
            "threshold": [repr(float(t)) for t in self.threshold],
            "left_levels": [None if lv is None else [float(x) for x in lv] for lv in self.left_levels],
            "children": [list(c) for c in self.children],
            "value": [repr(float(v)) for v in self.value],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RegressionTree":
        tree = cls()
        tree.feature = [int(f) for f in doc["feature"]]
        tree.threshold = [float(t) for t in doc["threshold"]]
        tree.left_levels = [None if lv is None else tuple(lv) for lv in doc["left_levels"]]
        tree.children = [tuple(c) for c in doc["children"]]
        tree.value = [float(v) for v in doc["value"]]
        return tree


def _best_split_on(xs, ys, min_node):
    """Best threshold position for a pre-sorted feature column.

    Returns (score, position) where rows [0, position) go left, or None.
    The score is the post-split sum over children of (sum y)^2 / n, a
    monotone transform of the variance reduction.
    """
    n = xs.size
    csum = np.cumsum(ys)
    total = csum[-1]
    pos = np.arange(1, n)
    valid = (xs[1:] != xs[:-1]) & (pos >= min_node) & (n - pos >= min_node)
    if not np.any(valid):
        return None
    left_sum = csum[:-1]
    score = left_sum ** 2 / pos + (total - left_sum) ** 2 / (n - pos)
    score = np.where(valid, score, -np.inf)
    best = int(np.argmax(score))
    return float(score[best]), best + 1


def _find_split(X, y, idx, features, categorical, min_node):
    best = None  # (score, feature, kind-specific payload)
    ysub = y[idx]
    for f in features:
        xs = X[idx, f]
        if categorical[f]:
            levels = np.unique(xs)
            if levels.size < 2:
                continue
            means = np.array([ysub[xs == lv].mean() for lv in levels])
            level_order = levels[np.lexsort((levels, means))]
            rank = {lv: i for i, lv in enumerate(level_order)}
            ranked = np.array([rank[v] for v in xs], dtype=float)
            order = np.argsort(ranked, kind="stable")
            found = _best_split_on(ranked[order], ysub[order], min_node)
            if found is None:
                continue
            score, pos = found
            cut_rank = ranked[order][pos - 1]
            left_levels = tuple(float(lv) for lv in level_order[:int(cut_rank) + 1])
            payload = ("cat", left_levels)
        else:
            order = np.argsort(xs, kind="stable")
            found = _best_split_on(xs[order], ysub[order], min_node)
            if found is None:
                continue
            score, pos = found
            thr = 0.5 * (xs[order][pos - 1] + xs[order][pos])
            payload = ("num", thr)
        if best is None or score > best[0]:
            best = (score, f, payload)
    return best


def grow_tree(X, y, categorical, max_depth=None, min_node=1, mtry=None, rng=None):
    """Grow a CART regression tree; returns (tree, training predictions).

    `mtry` samples that many candidate features per split from `rng`.
    Degenerate nodes (no valid split) become leaves, never an error.
    """
    n, p = X.shape
    if n == 0:
        raise ContractError("cannot grow a tree on zero rows")
    if mtry is not None and (rng is None or not (1 <= mtry)):
        raise ContractError("mtry requires an rng and mtry >= 1")
    tree = RegressionTree()
    train_pred = np.empty(n)
    root = tree._add_node()
    stack = [(root, np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ysub = y[idx]
        mean = float(ysub.mean())
        tree.value[node] = mean
        if (max_depth is not None and depth >= max_depth) or idx.size < 2 * min_node or np.all(ysub == ysub[0]):
            train_pred[idx] = mean
            continue
        if mtry is not None and mtry < p:
            features = np.sort(rng.choice(p, size=mtry, replace=False))
        else:
            features = np.arange(p)
        found = _find_split(X, y, idx, features, categorical, min_node)
        if found is None:
            train_pred[idx] = mean
            continue
        _, f, payload = found
        tree.feature[node] = int(f)
        if payload[0] == "cat":
            tree.left_levels[node] = payload[1]
            go_left = np.isin(X[idx, f], payload[1])
        else:
            tree.threshold[node] = float(payload[1])
            go_left = X[idx, f] <= payload[1]
        left = tree._add_node()
        right = tree._add_node()
        tree.children[node] = (left, right)
        stack.append((left, idx[go_left], depth + 1))
        stack.append((right, idx[~go_left], depth + 1))
    return tree, train_pred
