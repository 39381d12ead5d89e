"""Leave-one-subject-out evaluation and repeated-run averaging."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Any, Sequence

import numpy as np

from .classify import ClassifierSpec
from .datamodel import (
    METRIC_KEYS,
    ConfusionCounts,
    EvaluationReport,
    Metrics,
    RunResult,
    SubjectFeatures,
)
from .errors import EvaluationError
from .rng import derive_seed


def _ratio(num: int, den: int, name: str, undefined: list[str]) -> float:
    if den == 0:
        undefined.append(name)
        return 0.0
    return num / den


def compute_metrics(c: ConfusionCounts) -> Metrics:
    """Accuracy, sensitivity, specificity, precision and F1 from counts.

    A metric whose denominator is zero is reported as 0 and its name is
    listed in ``Metrics.undefined``.
    """
    if c.total == 0:
        raise EvaluationError("cannot compute metrics from zero samples")
    undefined: list[str] = []
    accuracy = (c.tp + c.tn) / (c.fp + c.fn + c.tp + c.tn)
    sensitivity = _ratio(c.tp, c.tp + c.fn, "sensitivity", undefined)
    specificity = _ratio(c.tn, c.tn + c.fp, "specificity", undefined)
    precision = _ratio(c.tp, c.tp + c.fp, "precision", undefined)
    if precision + sensitivity == 0:
        undefined.append("f1")
        f1 = 0.0
    else:
        f1 = 2 * precision * sensitivity / (precision + sensitivity)
    return Metrics(accuracy, sensitivity, specificity, precision, f1, tuple(undefined))


def _matrix(features: Sequence[SubjectFeatures]) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([f.values for f in features])
    y = np.array([int(f.label) for f in features], dtype=np.int64)
    return X, y


def _check_dataset(features: Sequence[SubjectFeatures]) -> None:
    if len(features) < 2:
        raise EvaluationError(f"leave-one-subject-out needs at least 2 subjects, got {len(features)}")
    labels = {int(f.label) for f in features}
    if len(labels) < 2:
        raise EvaluationError("dataset contains a single class")
    ids = [f.id for f in features]
    if len(set(ids)) != len(ids):
        raise EvaluationError("duplicate subject ids in feature table")


def loso_predictions(features: Sequence[SubjectFeatures], spec: ClassifierSpec, seed: int = 0) -> np.ndarray:
    """Predicted class for each subject from a model trained on all others.

    Fold ``i`` (subject ``i`` in input order) seeds the classifier with
    ``derive_seed(seed, i)``; deterministic classifiers ignore it.
    """
    _check_dataset(features)
    X, y = _matrix(features)
    preds = np.empty(len(y), dtype=np.int64)
    keep = np.ones(len(y), dtype=bool)
    for i in range(len(y)):
        keep[i] = False
        model = spec.fit(X[keep], y[keep], derive_seed(seed, i))
        keep[i] = True
        preds[i] = model.predict(X[i])
    return preds


def tally(y_true: np.ndarray, y_pred: np.ndarray) -> ConfusionCounts:
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    return ConfusionCounts(
        tp=int(np.sum((y_true == 1) & (y_pred == 1))),
        tn=int(np.sum((y_true == 0) & (y_pred == 0))),
        fp=int(np.sum((y_true == 0) & (y_pred == 1))),
        fn=int(np.sum((y_true == 1) & (y_pred == 0))),
    )


def loso_run(features: Sequence[SubjectFeatures], spec: ClassifierSpec, seed: int = 0) -> ConfusionCounts:
    preds = loso_predictions(features, spec, seed)
    return tally([int(f.label) for f in features], preds)


def _one_run(args) -> RunResult:
    features, spec, run, run_seed = args
    counts = loso_run(features, spec, run_seed)
    return RunResult(run, run_seed, counts, compute_metrics(counts))


def repeated_evaluation(
    features: Sequence[SubjectFeatures],
    spec: ClassifierSpec,
    runs: int = 100,
    master_seed: int = 0,
    config: dict[str, Any] | None = None,
    workers: int = 1,
) -> EvaluationReport:
    """Repeat the LOSO protocol ``runs`` times and average the per-run metrics.

    Run ``r`` uses seed ``derive_seed(master_seed, r)``. Runs may be spread
    over ``workers`` processes; results are collected in run order, so the
    report does not depend on the worker count.
    """
    if runs < 1:
        raise EvaluationError("runs must be >= 1")
    _check_dataset(features)
    features = list(features)
    jobs = [(features, spec, r, derive_seed(master_seed, r)) for r in range(runs)]
    if workers > 1 and runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one_run, jobs, chunksize=max(1, runs // (4 * workers))))
    else:
        results = [_one_run(j) for j in jobs]
    averaged = {k: sum(getattr(r.metrics, k) for r in results) / runs for k in METRIC_KEYS}
    echo = {
        "classifier": spec.to_dict(),
        "runs": runs,
        "seed": master_seed,
        **(config or {}),
    }
    return EvaluationReport(tuple(results), averaged, echo, n_subjects=len(features))
