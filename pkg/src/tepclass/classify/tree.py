"""Greedy binary decision tree on continuous features.

Splits send ``x[f] <= threshold`` left. Candidate thresholds are midpoints
between consecutive distinct values. Impurity sums are assembled from
integer class counts through a fixed lookup table, so identical count
configurations score identically on every feature; ties then go to the
lower feature index and the lower threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ClassifierError

CRITERIA = ("entropy", "gini")


@dataclass(frozen=True, eq=False)
class TreeModel:
    feature: np.ndarray  # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, 2) training class histogram
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def leaf_class(self) -> np.ndarray:
        # majority, ties to class 0
        return (self.counts[:, 1] > self.counts[:, 0]).astype(np.int64)

    def predict(self, X) -> np.ndarray:
        return predict_tree(self, X)


def _as_training(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64).reshape(-1)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] == 0:
        raise ClassifierError("empty training set")
    if X.shape[0] != y.shape[0]:
        raise ClassifierError(f"{X.shape[0]} samples but {y.shape[0]} labels")
    if not np.all(np.isfinite(X)):
        raise ClassifierError("training features must be finite")
    if np.any((y != 0) & (y != 1)):
        raise ClassifierError("labels must be 0 or 1")
    return X, y


def _xlogx(n: int) -> np.ndarray:
    k = np.arange(n + 1, dtype=np.float64)
    out = np.zeros(n + 1)
    out[1:] = k[1:] * np.log2(k[1:])
    return out


def _impurity_sum(criterion, table, n, n1):
    """Size-weighted impurity ``n * H`` of nodes holding ``n1`` of ``n`` positives."""
    n0 = n - n1
    if criterion == "entropy":
        return table[n] - table[n0] - table[n1]
    return n - (n0 * n0 + n1 * n1) / np.maximum(n, 1)


class _Builder:
    def __init__(self, X, y, criterion, min_leaf, max_features, rng):
        if criterion not in CRITERIA:
            raise ClassifierError(f"unknown criterion {criterion!r}")
        if min_leaf < 1:
            raise ClassifierError("min_leaf must be >= 1")
        self.X, self.y = X, y
        self.criterion = criterion
        self.min_leaf = int(min_leaf)
        d = X.shape[1]
        self.max_features = d if max_features is None else int(max_features)
        if not 1 <= self.max_features <= d:
            raise ClassifierError(f"max_features must lie in [1, {d}]")
        self.rng = rng
        if self.max_features < d and rng is None:
            raise ClassifierError("feature subsampling needs an rng")
        self.table = _xlogx(X.shape[0])

    def best_split(self, idx: np.ndarray):
        X, y, m = self.X, self.y, self.min_leaf
        n = len(idx)
        yi = y[idx]
        n1 = int(yi.sum())
        parent = _impurity_sum(self.criterion, self.table, n, n1)
        d = X.shape[1]
        if self.max_features < d:
            feats = np.sort(self.rng.choice(d, self.max_features, replace=False))
        else:
            feats = range(d)
        best = None  # (score, feature, threshold)
        for f in feats:
            v = X[idx, f]
            order = np.argsort(v, kind="stable")
            vs, ys = v[order], yi[order]
            cum1 = np.cumsum(ys)
            # split after position i: left gets i + 1 samples
            i = np.arange(m - 1, n - m)
            if i.size == 0:
                return None
            i = i[vs[i] < vs[i + 1]]
            if i.size == 0:
                continue
            n_left = i + 1
            l1 = cum1[i]
            score = _impurity_sum(self.criterion, self.table, n_left, l1) + _impurity_sum(
                self.criterion, self.table, n - n_left, n1 - l1
            )
            j = int(np.argmin(score))
            if best is None or score[j] < best[0]:
                lo, hi = vs[i[j]], vs[i[j] + 1]
                thr = (lo + hi) / 2.0
                if not lo <= thr < hi:
                    thr = lo
                best = (float(score[j]), int(f), float(thr))
        if best is None:
            return None
        # gain <= 0 (up to rounding) means the split does not help
        if parent - best[0] <= 1e-9 * max(1.0, parent):
            return None
        return best[1], best[2]

    def build(self) -> TreeModel:
        X, y = self.X, self.y
        feature, threshold, left, right, counts = [], [], [], [], []

        def new_node(idx):
            n1 = int(y[idx].sum())
            feature.append(-1)
            threshold.append(np.nan)
            left.append(-1)
            right.append(-1)
            counts.append((len(idx) - n1, n1))
            return len(feature) - 1

        root = new_node(np.arange(len(y)))
        stack = [(root, np.arange(len(y)))]
        while stack:
            node, idx = stack.pop()
            c0, c1 = counts[node]
            if c0 == 0 or c1 == 0 or len(idx) < 2 * self.min_leaf:
                continue
            split = self.best_split(idx)
            if split is None:
                continue
            f, thr = split
            go_left = X[idx, f] <= thr
            li, ri = idx[go_left], idx[~go_left]
            feature[node], threshold[node] = f, thr
            left[node] = new_node(li)
            right[node] = new_node(ri)
            # right pushed first so the left subtree is expanded first
            stack.append((right[node], ri))
            stack.append((left[node], li))
        return TreeModel(
            feature=np.array(feature, dtype=np.int64),
            threshold=np.array(threshold, dtype=np.float64),
            left=np.array(left, dtype=np.int64),
            right=np.array(right, dtype=np.int64),
            counts=np.array(counts, dtype=np.int64).reshape(-1, 2),
            n_features=X.shape[1],
        )


def train_decision_tree(
    X,
    y,
    criterion: str = "entropy",
    min_leaf: int = 10,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> TreeModel:
    """Fit a tree by recursive information-gain splitting.

    A node stays a leaf when it is pure, when no split leaves at least
    ``min_leaf`` samples on both sides, or when the best gain is not
    positive. ``max_features`` draws a fresh random feature subset at every
    node from ``rng``.
    """
    X, y = _as_training(X, y)
    return _Builder(X, y, criterion, min_leaf, max_features, rng).build()


def predict_tree(model: TreeModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.n_features:
        raise ClassifierError(f"expected {model.n_features} features, got {X.shape[1]}")
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    while True:
        f = model.feature[node]
        inner = f >= 0
        if not inner.any():
            break
        r, nd = rows[inner], node[inner]
        go_left = X[r, f[inner]] <= model.threshold[nd]
        node[inner] = np.where(go_left, model.left[nd], model.right[nd])
    out = model.leaf_class()[node]
    return out[0] if single else out
