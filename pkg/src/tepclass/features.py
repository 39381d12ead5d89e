"""Time-domain features of pulse-locked EEG.

Per trial and channel, 13 scalars are computed on the post-pulse segment
(descriptive statistics, Hjorth parameters, energy and four windowed peak
magnitudes). The fourteenth feature is the area under the global mean
field potential across the montage channels. All series functions operate
along the last axis so they vectorize over channels and trials.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .datamodel import FEATURE_KEYS, EpochSet, Label, SubjectFeatures
from .errors import FeatureError
from .montage import Montage, select_channels

log = logging.getLogger(__name__)

MOMENT_FLOOR = 1e-12


@dataclass(frozen=True)
class PeakWindows:
    """Post-pulse latency windows in ms, bounds inclusive."""

    p1: tuple[float, float] = (25.0, 40.0)
    p2: tuple[float, float] = (45.0, 80.0)
    p3: tuple[float, float] = (85.0, 150.0)
    p4: tuple[float, float] = (160.0, 250.0)

    def __post_init__(self):
        prev_hi = -np.inf
        for lo, hi in self.as_tuple():
            if not (0 <= lo <= hi) or lo <= prev_hi:
                raise FeatureError(f"peak windows must be non-overlapping and increasing: {self}")
            prev_hi = hi

    def as_tuple(self) -> tuple[tuple[float, float], ...]:
        return (self.p1, self.p2, self.p3, self.p4)


class Hjorth(NamedTuple):
    activity: np.ndarray
    mobility: np.ndarray
    complexity: np.ndarray
    degenerate: np.ndarray  # True where some variance level vanished


def normalize_trials(data: np.ndarray, t0_index: int) -> np.ndarray:
    """Vectorized :func:`normalize_trial` over a trials x channels x samples tensor."""
    data = np.asarray(data, dtype=np.float64)
    if t0_index < 1:
        raise FeatureError("empty baseline window")
    x = data - data[..., :t0_index].mean(axis=-1, keepdims=True)
    sd = x.std(axis=(-2, -1))
    flat = np.flatnonzero(~(sd > 0))
    if flat.size:
        raise FeatureError(f"trial {int(flat[0])}: zero global variance, cannot normalize")
    return x / sd[:, None, None]


def normalize_trial(epoch: np.ndarray, t0_index: int, trial: int | None = None) -> np.ndarray:
    """Baseline-correct each channel, then scale by the trial-global std.

    The baseline is every sample before ``t0_index``; the std is taken
    over all channels and samples after baseline removal.
    """
    try:
        return normalize_trials(np.asarray(epoch)[None], t0_index)[0]
    except FeatureError:
        name = "trial" if trial is None else f"trial {trial}"
        raise FeatureError(f"{name}: zero global variance or empty baseline, cannot normalize") from None


def descriptive_stats(x: np.ndarray):
    """Return ``(max, min, mean, skew, kurtosis)`` along the last axis.

    Population moments; kurtosis is excess kurtosis. Skew and kurtosis are
    0 where the second central moment is below ``1e-12``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 2:
        raise FeatureError("descriptive statistics need at least 2 samples")
    mean = x.mean(axis=-1)
    dev = x - mean[..., None]
    m2 = np.mean(dev**2, axis=-1)
    m3 = np.mean(dev**3, axis=-1)
    m4 = np.mean(dev**4, axis=-1)
    ok = m2 >= MOMENT_FLOOR
    safe = np.where(ok, m2, 1.0)
    skew = np.where(ok, m3 / safe**1.5, 0.0)
    kurt = np.where(ok, m4 / safe**2 - 3.0, 0.0)
    return x.max(axis=-1), x.min(axis=-1), mean, skew, kurt


def _flat(v: np.ndarray, ms: np.ndarray) -> np.ndarray:
    # variance negligible relative to the level's mean square
    return v <= 1e-12 * ms


def hjorth(x: np.ndarray) -> Hjorth:
    """Hjorth activity, mobility and complexity along the last axis.

    Derivatives are plain first differences (no ``1/dt``). Where the signal,
    its difference or its second difference has zero variance, all three
    parameters are set to 0 and ``degenerate`` is True.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 3:
        raise FeatureError("Hjorth parameters need at least 3 samples")
    d1 = np.diff(x, axis=-1)
    d2 = np.diff(d1, axis=-1)
    v0, v1, v2 = x.var(axis=-1), d1.var(axis=-1), d2.var(axis=-1)
    bad = (
        _flat(v0, np.mean(x**2, axis=-1))
        | _flat(v1, np.mean(d1**2, axis=-1))
        | _flat(v2, np.mean(d2**2, axis=-1))
    )
    v0s, v1s = np.where(bad, 1.0, v0), np.where(bad, 1.0, v1)
    mobility = np.sqrt(v1s / v0s)
    complexity = np.sqrt(v2 / v1s) / mobility
    zero = np.zeros_like(v0)
    return Hjorth(
        np.where(bad, zero, v0),
        np.where(bad, zero, mobility),
        np.where(bad, zero, complexity),
        bad,
    )


def energy(x: np.ndarray) -> np.ndarray:
    """Sum of squared samples along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    return np.sum(x * x, axis=-1)


def _window_mask(n: int, fs: float, window: tuple[float, float]) -> np.ndarray:
    lo, hi = window
    t_ms = np.arange(n) * (1000.0 / fs)
    if hi > (n - 1) * 1000.0 / fs + 1e-9:
        raise FeatureError(f"peak window {window} ms extends past the {n}-sample series")
    return (t_ms >= lo - 1e-9) & (t_ms <= hi + 1e-9)


def peak_amplitudes(x: np.ndarray, fs: float, windows: PeakWindows = PeakWindows()):
    """Largest absolute value inside each latency window.

    ``x`` starts at the pulse (sample 0 is t = 0).
    """
    x = np.abs(np.asarray(x, dtype=np.float64))
    out = []
    for w in windows.as_tuple():
        mask = _window_mask(x.shape[-1], fs, w)
        if not mask.any():
            raise FeatureError(f"peak window {w} ms contains no samples at {fs} Hz")
        out.append(x[..., mask].max(axis=-1))
    return tuple(out)


def gmfp(epoch_subset: np.ndarray) -> np.ndarray:
    """Global mean field potential over channels (axis -2) at every sample."""
    x = np.asarray(epoch_subset, dtype=np.float64)
    m = x.shape[-2] if x.ndim >= 2 else 0
    if m < 2:
        raise FeatureError(f"GMFP needs at least 2 channels, got {m}")
    dev = x - x.mean(axis=-2, keepdims=True)
    return np.sqrt(np.sum(dev * dev, axis=-2) / m)


def auc(series: np.ndarray, fs: float) -> np.ndarray:
    """Trapezoidal integral along the last axis in value-seconds."""
    y = np.asarray(series, dtype=np.float64)
    if y.shape[-1] < 2:
        raise FeatureError("AUC needs at least 2 samples")
    return np.sum((y[..., :-1] + y[..., 1:]) / 2.0, axis=-1) / fs


def channel_features(post: np.ndarray, fs: float, windows: PeakWindows = PeakWindows()) -> np.ndarray:
    """The 13 per-channel features, stacked on a new leading axis.

    ``post`` is (..., samples) starting at the pulse; the result is
    ``(13, ...)`` in ``FEATURE_KEYS`` order.
    """
    mx, mn, mean, skew, kurt = descriptive_stats(post)
    hj = hjorth(post)
    if np.any(hj.degenerate):
        log.warning("%d series with vanishing Hjorth variance set to zero", int(hj.degenerate.sum()))
    peaks = peak_amplitudes(post, fs, windows)
    return np.stack([mx, mn, mean, skew, kurt, hj.activity, hj.mobility, hj.complexity, energy(post), *peaks])


def _montage_trials(post: np.ndarray, per_channel: np.ndarray, rows, fs: float) -> np.ndarray:
    sub = post[:, rows]
    if sub.shape[1] >= 2:
        auc_gmfp = auc(gmfp(sub), fs)
    else:
        # one channel: every deviation from the channel mean is zero
        auc_gmfp = np.zeros(sub.shape[0])
    return np.column_stack([per_channel[:, :, rows].mean(axis=-1).T, auc_gmfp])


def trial_features(
    data: np.ndarray, t0_index: int, fs: float, rows, windows: PeakWindows = PeakWindows()
) -> np.ndarray:
    """Per-trial 14-vectors: channel-averaged features plus AUC-GMFP.

    ``data`` is trials x channels x samples on the full channel set; it is
    normalized there and then restricted to ``rows``.
    """
    post = normalize_trials(data, t0_index)[:, :, t0_index:]
    rows = list(rows)
    per_channel = np.zeros((13, *post.shape[:2]))
    per_channel[:, :, rows] = channel_features(post[:, rows], fs, windows)
    return _montage_trials(post, per_channel, rows, fs)


def subject_feature_vector(
    epochs: EpochSet,
    montage: Montage,
    windows: PeakWindows = PeakWindows(),
    subject_id: str = "",
    label: Label | int = Label.HC,
) -> SubjectFeatures:
    """Average per-trial features over montage channels, then over trials.

    Each trial is normalized on the full channel set before the montage is
    applied. Reductions run in storage order so the result is
    bit-reproducible.
    """
    if epochs.n_trials < 1:
        raise FeatureError(f"subject {subject_id!r}: no trials")
    sub = select_channels(epochs, montage)
    index = {c: i for i, c in enumerate(epochs.channels)}
    rows = [index[c] for c in sub.channels]
    if len(rows) < 2:
        log.warning("montage %r has one channel; auc_gmfp is 0", montage.name)
    per_trial = trial_features(epochs.data, epochs.t0_index, epochs.fs_hz, rows, windows)
    values = per_trial.mean(axis=0)
    return SubjectFeatures(subject_id, label, values)


def montage_feature_vectors(
    epochs: EpochSet,
    montages,
    windows: PeakWindows = PeakWindows(),
    subject_id: str = "",
    label: Label | int = Label.HC,
) -> dict[str, SubjectFeatures]:
    """:func:`subject_feature_vector` for several montages, keyed by name.

    Per-channel features do not depend on the montage, so they are computed
    once on the union of the montages' channels.
    """
    if epochs.n_trials < 1:
        raise FeatureError(f"subject {subject_id!r}: no trials")
    index = {c: i for i, c in enumerate(epochs.channels)}
    row_sets = {}
    for m in montages:
        row_sets[m.name] = [index[c] for c in select_channels(epochs, m).channels]
        if len(row_sets[m.name]) < 2:
            log.warning("montage %r has one channel; auc_gmfp is 0", m.name)
    used = sorted({r for rows in row_sets.values() for r in rows})
    post = normalize_trials(epochs.data, epochs.t0_index)[:, :, epochs.t0_index :]
    per_channel = np.zeros((13, *post.shape[:2]))
    per_channel[:, :, used] = channel_features(post[:, used], epochs.fs_hz, windows)
    return {
        name: SubjectFeatures(subject_id, label, _montage_trials(post, per_channel, rows, epochs.fs_hz).mean(axis=0))
        for name, rows in row_sets.items()
    }
