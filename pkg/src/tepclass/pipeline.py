"""End-to-end orchestration shared by the CLI and the acceptance suite.

Subjects are processed independently (optionally in worker processes) and
collected in manifest order, so outputs never depend on the worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .datamodel import EpochSet, Label, RawRecording, SubjectFeatures
from .features import PeakWindows, montage_feature_vectors
from .io import Manifest, read_epochs, read_recording
from .montage import Montage
from .preprocess import PreprocessConfig, ProcessingLog, preprocess_pipeline
from .synth import SynthSpec, generate_subject

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubjectResult:
    id: str
    label: Label
    features: dict[str, SubjectFeatures]  # keyed by montage name
    plog: ProcessingLog
    epochs: EpochSet | None = None


def _features_for(epochs, sid, label, montages, windows) -> dict[str, SubjectFeatures]:
    return montage_feature_vectors(epochs, montages, windows, sid, label)


def process_recording(
    sid: str,
    label: Label,
    raw: RawRecording,
    montages: Sequence[Montage],
    pre: PreprocessConfig,
    windows: PeakWindows,
    keep_epochs: bool = False,
) -> SubjectResult:
    plog = ProcessingLog()
    epochs = preprocess_pipeline(raw, pre, plog)
    feats = _features_for(epochs, sid, label, montages, windows)
    return SubjectResult(sid, label, feats, plog, epochs if keep_epochs else None)


def _synth_job(args) -> tuple[SubjectResult, RawRecording | None]:
    spec, index, montages, pre, windows, keep = args
    record, raw = generate_subject(spec, index)
    res = process_recording(record.id, record.label, raw, montages, pre, windows, keep)
    return res, (raw if keep else None)


def _manifest_job(args) -> tuple[SubjectResult, None]:
    sid, label, path, montages, pre, windows, keep = args
    path = Path(path)
    if path.suffix == ".tepe":
        epochs = read_epochs(path)
        res = SubjectResult(sid, label, _features_for(epochs, sid, label, montages, windows), ProcessingLog())
    else:
        res = process_recording(sid, label, read_recording(path), montages, pre, windows, keep)
    return res, None


def _map(fn: Callable, jobs: list, workers: int) -> list:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def synth_features(
    spec: SynthSpec,
    montages: Sequence[Montage],
    pre: PreprocessConfig = PreprocessConfig(),
    windows: PeakWindows = PeakWindows(),
    workers: int = 1,
    keep: bool = False,
) -> list[tuple[SubjectResult, RawRecording | None]]:
    """Generate, preprocess and featurize every synthetic subject in memory."""
    spec.validate()
    n = spec.n_ad + spec.n_hc
    jobs = [(spec, i, tuple(montages), pre, windows, keep) for i in range(n)]
    return _map(_synth_job, jobs, workers)


def manifest_features(
    manifest: Manifest,
    montages: Sequence[Montage],
    pre: PreprocessConfig = PreprocessConfig(),
    windows: PeakWindows = PeakWindows(),
    workers: int = 1,
    keep: bool = False,
) -> list[SubjectResult]:
    """Featurize the subjects of a manifest of raw (.tepr) or preprocessed (.tepe) files."""
    jobs = [(s.id, s.label, str(manifest.resolve(s)), tuple(montages), pre, windows, keep) for s in manifest.subjects]
    return [r for r, _ in _map(_manifest_job, jobs, workers)]


def by_montage(results: Sequence[SubjectResult], name: str) -> list[SubjectFeatures]:
    return [r.features[name] for r in results]
