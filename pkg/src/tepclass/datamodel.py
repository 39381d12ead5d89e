"""Core domain types shared by every stage of the pipeline."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import EvaluationError, FeatureError, FormatError, PreprocessError

FEATURE_KEYS: tuple[str, ...] = (
    "max",
    "min",
    "mean",
    "skew",
    "kurtosis",
    "activity",
    "mobility",
    "complexity",
    "energy",
    "p1",
    "p2",
    "p3",
    "p4",
    "auc_gmfp",
)
N_FEATURES = len(FEATURE_KEYS)


class Label(enum.IntEnum):
    """Diagnostic class. AD is the positive class everywhere."""

    HC = 0
    AD = 1

    @classmethod
    def parse(cls, value: str | int | "Label") -> "Label":
        if isinstance(value, Label):
            return value
        if isinstance(value, str):
            try:
                return cls[value]
            except KeyError:
                raise ValueError(f"unknown label {value!r} (expected 'AD' or 'HC')") from None
        return cls(int(value))


def _check_channels(channels: Sequence[str], err=FormatError) -> tuple[str, ...]:
    channels = tuple(channels)
    for name in channels:
        if not isinstance(name, str) or not name:
            raise err(f"invalid channel label {name!r}")
    if len(set(channels)) != len(channels):
        seen, dup = set(), []
        for name in channels:
            if name in seen:
                dup.append(name)
            seen.add(name)
        raise err(f"duplicate channel labels: {', '.join(dup)}")
    return channels


@dataclass(frozen=True, eq=False)
class RawRecording:
    """Continuous multichannel EEG (microvolts) with pulse sample indices."""

    channels: tuple[str, ...]
    fs_hz: float
    data: np.ndarray  # channels x samples
    pulse_samples: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "channels", _check_channels(self.channels))
        if not (self.fs_hz > 0 and math.isfinite(self.fs_hz)):
            raise FormatError(f"fs_hz must be positive, got {self.fs_hz}")
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] != len(self.channels):
            raise FormatError(
                f"data shape {data.shape} does not match {len(self.channels)} channels"
            )
        pulses = np.asarray(self.pulse_samples, dtype=np.int64).reshape(-1)
        if pulses.size:
            if np.any(np.diff(pulses) <= 0):
                raise FormatError("pulse indices must be strictly increasing")
            if pulses[0] < 0 or pulses[-1] >= data.shape[1]:
                raise FormatError(f"pulse index outside [0, {data.shape[1]})")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "pulse_samples", pulses)

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class EpochSet:
    """Pulse-locked epochs, ``data`` shaped trials x channels x samples.

    Sample ``i`` sits at time ``(i - t0_index) / fs_hz`` seconds relative to
    the pulse.
    """

    channels: tuple[str, ...]
    fs_hz: float
    t0_index: int
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "channels", _check_channels(self.channels))
        if not (self.fs_hz > 0 and math.isfinite(self.fs_hz)):
            raise FormatError(f"fs_hz must be positive, got {self.fs_hz}")
        data = np.asarray(self.data)
        if data.ndim != 3 or data.shape[1] != len(self.channels):
            raise FormatError(
                f"epoch tensor shape {data.shape} does not match {len(self.channels)} channels"
            )
        t0 = int(self.t0_index)
        if not 0 <= t0 < data.shape[2]:
            raise FormatError(f"t0_index {t0} outside [0, {data.shape[2]})")
        object.__setattr__(self, "t0_index", t0)
        object.__setattr__(self, "data", data)

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_samples(self) -> int:
        return self.data.shape[2]

    def times(self) -> np.ndarray:
        return (np.arange(self.n_samples) - self.t0_index) / self.fs_hz


@dataclass(frozen=True)
class SubjectRecord:
    id: str
    label: Label
    path: str


@dataclass(frozen=True, eq=False)
class SubjectFeatures:
    """One subject's 14-value feature vector in ``FEATURE_KEYS`` order."""

    id: str
    label: Label
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.size != N_FEATURES:
            raise FeatureError(f"subject {self.id}: expected {N_FEATURES} features, got {values.size}")
        if not np.all(np.isfinite(values)):
            bad = [k for k, v in zip(FEATURE_KEYS, values) if not np.isfinite(v)]
            raise FeatureError(f"subject {self.id}: non-finite features {bad}")
        object.__setattr__(self, "label", Label.parse(self.label))
        object.__setattr__(self, "values", values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_KEYS, self.values.tolist()))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise EvaluationError(f"negative confusion count in {self}")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )


METRIC_KEYS: tuple[str, ...] = ("accuracy", "sensitivity", "specificity", "precision", "f1")


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    sensitivity: float
    specificity: float
    precision: float
    f1: float
    # names of metrics whose denominator was zero and were set to 0
    undefined: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in METRIC_KEYS}


@dataclass(frozen=True)
class RunResult:
    run: int
    seed: int
    counts: ConfusionCounts
    metrics: Metrics


@dataclass(frozen=True)
class EvaluationReport:
    """Per-run LOSO results plus their arithmetic mean.

    ``config`` is the fully resolved configuration echoed into every
    serialized report.
    """

    runs: tuple[RunResult, ...]
    averaged: dict[str, float]
    config: dict[str, Any] = field(default_factory=dict)
    n_subjects: int = 0

    def __post_init__(self):
        if not self.runs:
            raise EvaluationError("report needs at least one run")
        for r in self.runs:
            if r.counts.total != self.n_subjects:
                raise EvaluationError(
                    f"run {r.run}: counts sum to {r.counts.total}, expected {self.n_subjects}"
                )
