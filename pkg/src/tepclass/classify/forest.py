"""Bagged random forest of entropy trees with majority voting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ClassifierError
from ..rng import derive_seed, generator
from .tree import TreeModel, _as_training, predict_tree, train_decision_tree


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[TreeModel, ...]
    tree_seeds: tuple[int, ...]

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict(self, X) -> np.ndarray:
        return predict_forest(self, X)


def default_mtry(n_features: int) -> int:
    return max(1, math.isqrt(n_features))


def train_random_forest(
    X,
    y,
    n_trees: int = 100,
    min_leaf: int = 10,
    criterion: str = "entropy",
    mtry: int | None = None,
    bootstrap: bool = True,
    seed: int = 0,
) -> ForestModel:
    """Fit ``n_trees`` trees, each on its own bootstrap resample.

    Tree ``t`` draws from a stream seeded by ``derive_seed(seed, t)``, so
    any tree can be rebuilt in isolation.
    """
    X, y = _as_training(X, y)
    if n_trees < 1:
        raise ClassifierError("n_trees must be >= 1")
    n, d = X.shape
    mtry = default_mtry(d) if mtry is None else int(mtry)
    trees, seeds = [], []
    for t in range(n_trees):
        tree_seed = derive_seed(seed, t)
        rng = generator(tree_seed)
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(train_decision_tree(X[rows], y[rows], criterion, min_leaf, mtry, rng))
        seeds.append(tree_seed)
    return ForestModel(tuple(trees), tuple(seeds))


def predict_forest(model: ForestModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    votes = sum(predict_tree(t, np.atleast_2d(X)) for t in model.trees)
    # strict majority for class 1, ties to class 0
    out = (2 * votes > model.n_trees).astype(np.int64)
    return out[0] if single else out
