"""From-scratch classifiers: decision tree, ball-tree kNN, random forest."""

from __future__ import annotations

from dataclasses import asdict, dataclass


from ..errors import ClassifierError
from .balltree import BallTree
from .forest import ForestModel, default_mtry, predict_forest, train_random_forest
from .knn import KnnModel, fit_knn, predict_knn
from .tree import TreeModel, predict_tree, train_decision_tree

CLASSIFIERS = ("dt", "knn", "rf")

__all__ = [
    "CLASSIFIERS",
    "BallTree",
    "ClassifierSpec",
    "ForestModel",
    "KnnModel",
    "TreeModel",
    "default_mtry",
    "fit_knn",
    "predict_forest",
    "predict_knn",
    "predict_tree",
    "train_decision_tree",
    "train_random_forest",
]


@dataclass(frozen=True)
class ClassifierSpec:
    """Classifier choice plus hyperparameters; unused fields are ignored."""

    name: str = "rf"
    min_leaf: int = 10
    criterion: str = "entropy"
    k: int = 7
    leaf_size: int = 10
    n_trees: int = 100
    mtry: int | None = None
    bootstrap: bool = True

    def __post_init__(self):
        if self.name not in CLASSIFIERS:
            raise ClassifierError(f"unknown classifier {self.name!r} (expected one of {CLASSIFIERS})")

    @property
    def uses_seed(self) -> bool:
        return self.name == "rf"

    def fit(self, X, y, seed: int = 0):
        if self.name == "dt":
            return train_decision_tree(X, y, self.criterion, self.min_leaf)
        if self.name == "knn":
            return fit_knn(X, y, self.k, self.leaf_size)
        return train_random_forest(
            X, y, self.n_trees, self.min_leaf, self.criterion, self.mtry, self.bootstrap, seed
        )

    def to_dict(self) -> dict:
        """Only the hyperparameters that affect this classifier."""
        full = asdict(self)
        keep = {
            "dt": ("name", "criterion", "min_leaf"),
            "knn": ("name", "k", "leaf_size"),
            "rf": ("name", "criterion", "min_leaf", "n_trees", "mtry", "bootstrap"),
        }[self.name]
        return {k: full[k] for k in keep}
