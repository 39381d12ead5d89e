"""Inverse-distance weighted k-nearest-neighbour classifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ClassifierError
from .balltree import BallTree
from .tree import _as_training


@dataclass(frozen=True, eq=False)
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int
    tree: BallTree

    def predict(self, X) -> np.ndarray:
        return predict_knn(self, X)


def fit_knn(X, y, k: int = 7, leaf_size: int = 10) -> KnnModel:
    X, y = _as_training(X, y)
    if k < 1:
        raise ClassifierError("k must be >= 1")
    return KnnModel(X, y, int(k), BallTree(X, leaf_size))


def _vote(dist: np.ndarray, labels: np.ndarray) -> int:
    zero = dist == 0
    if zero.any():
        # exact matches outvote everything else
        hits = labels[zero]
        return int(np.sum(hits == 1) > np.sum(hits == 0))
    w = 1.0 / dist
    return int(w[labels == 1].sum() > w[labels == 0].sum())


def predict_knn(model: KnnModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.X.shape[1]:
        raise ClassifierError(f"expected {model.X.shape[1]} features, got {X.shape[1]}")
    out = np.empty(X.shape[0], dtype=np.int64)
    for r, q in enumerate(X):
        dist, idx = model.tree.query(q, model.k)
        out[r] = _vote(dist, model.y[idx])
    return out[0] if single else out
