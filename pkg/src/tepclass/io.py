"""On-disk formats: binary recordings/epochs, manifests, feature tables, reports.

Binary container layout (all integers little-endian)::

    magic      4 ASCII bytes, b"TEPR" (recording) or b"TEPE" (epochs)
    version    u32
    hdr_len    u32, byte length of the JSON header
    header     UTF-8 JSON
    payload    float32 little-endian; channel-major for recordings,
               trial-major then channel-major for epochs
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
import struct
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import __version__
from .datamodel import (
    FEATURE_KEYS,
    METRIC_KEYS,
    EpochSet,
    EvaluationReport,
    Label,
    RawRecording,
    SubjectFeatures,
    SubjectRecord,
)
from .errors import FormatError, ManifestError

RECORDING_MAGIC = b"TEPR"
EPOCHS_MAGIC = b"TEPE"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sII")
_F32 = np.dtype("<f4")

REPORT_DECIMALS = 12


def _dump_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _write_container(path, magic: bytes, header: dict, payload: np.ndarray) -> None:
    hdr = _dump_header(header)
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(magic, FORMAT_VERSION, len(hdr)))
        fh.write(hdr)
        fh.write(np.ascontiguousarray(payload, dtype=_F32).tobytes())


def _read_container(path, magic: bytes) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as fh:
        prefix = fh.read(_PREFIX.size)
        if len(prefix) < _PREFIX.size:
            raise FormatError(f"{path}: truncated file")
        got, version, hdr_len = _PREFIX.unpack(prefix)
        if got != magic:
            raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        hdr = fh.read(hdr_len)
        if len(hdr) != hdr_len:
            raise FormatError(f"{path}: header length mismatch")
        try:
            header = json.loads(hdr.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: malformed header: {exc}") from None
        payload = np.frombuffer(fh.read(), dtype=_F32)
    return header, payload


def write_recording(rec: RawRecording, path) -> None:
    header = {
        "channels": list(rec.channels),
        "fs_hz": float(rec.fs_hz),
        "n_samples": int(rec.n_samples),
        "pulse_samples": [int(p) for p in rec.pulse_samples],
    }
    _write_container(path, RECORDING_MAGIC, header, rec.data)


def read_recording(path) -> RawRecording:
    header, payload = _read_container(path, RECORDING_MAGIC)
    try:
        channels = header["channels"]
        n_samples = int(header["n_samples"])
        fs = float(header["fs_hz"])
        pulses = header["pulse_samples"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: incomplete header ({exc})") from None
    expected = len(channels) * n_samples
    if payload.size != expected:
        raise FormatError(f"{path}: payload has {payload.size} values, header implies {expected}")
    return RawRecording(
        channels=channels,
        fs_hz=fs,
        data=payload.reshape(len(channels), n_samples),
        pulse_samples=np.asarray(pulses, dtype=np.int64),
    )


def write_epochs(epochs: EpochSet, path) -> None:
    header = {
        "channels": list(epochs.channels),
        "fs_hz": float(epochs.fs_hz),
        "n_trials": int(epochs.n_trials),
        "n_samples": int(epochs.n_samples),
        "t0_index": int(epochs.t0_index),
    }
    _write_container(path, EPOCHS_MAGIC, header, epochs.data)


def read_epochs(path) -> EpochSet:
    header, payload = _read_container(path, EPOCHS_MAGIC)
    try:
        channels = header["channels"]
        n_trials = int(header["n_trials"])
        n_samples = int(header["n_samples"])
        fs = float(header["fs_hz"])
        t0 = int(header["t0_index"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: incomplete header ({exc})") from None
    expected = n_trials * len(channels) * n_samples
    if payload.size != expected:
        raise FormatError(f"{path}: payload has {payload.size} values, header implies {expected}")
    return EpochSet(
        channels=channels,
        fs_hz=fs,
        t0_index=t0,
        data=payload.reshape(n_trials, len(channels), n_samples),
    )


# --- manifests -------------------------------------------------------------


class Manifest:
    """Parsed ``manifest.json``: global metadata plus subjects in file order."""

    def __init__(self, fs_hz: float, channel_labels: list[str], subjects: list[SubjectRecord], root: Path):
        self.fs_hz = fs_hz
        self.channel_labels = channel_labels
        self.subjects = subjects
        self.root = root

    def resolve(self, record: SubjectRecord) -> Path:
        p = Path(record.path)
        return p if p.is_absolute() else self.root / p


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: parse error: {exc}") from None
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: top level must be an object")
    try:
        fs = float(doc["fs_hz"])
        labels = [str(c) for c in doc["channel_labels"]]
        entries = doc["subjects"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{path}: missing or invalid field {exc}") from None
    if not entries:
        raise ManifestError(f"{path}: empty manifest")
    subjects, seen = [], set()
    for i, entry in enumerate(entries):
        try:
            sid, label, spath = str(entry["id"]), entry["label"], str(entry["path"])
        except (KeyError, TypeError):
            raise ManifestError(f"{path}: subject #{i} needs id, label and path") from None
        if label not in ("AD", "HC"):
            raise ManifestError(f"{path}: subject {sid!r} has unknown label {label!r}")
        if sid in seen:
            raise ManifestError(f"{path}: duplicate subject id {sid!r}")
        seen.add(sid)
        subjects.append(SubjectRecord(id=sid, label=Label[label], path=spath))
    return Manifest(fs, labels, subjects, path.parent)


def write_manifest(path, fs_hz: float, channel_labels: Iterable[str], subjects: Iterable[SubjectRecord]) -> None:
    doc = {
        "fs_hz": float(fs_hz),
        "channel_labels": list(channel_labels),
        "subjects": [{"id": s.id, "label": Label(s.label).name, "path": s.path} for s in subjects],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


# --- feature tables --------------------------------------------------------


def write_features_csv(features: Iterable[SubjectFeatures], path) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "label", *FEATURE_KEYS])
    for f in features:
        # repr round-trips float64 exactly
        w.writerow([f.id, Label(f.label).name, *(repr(float(v)) for v in f.values)])
    Path(path).write_text(buf.getvalue())


def read_features_csv(path) -> list[SubjectFeatures]:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["id", "label", *FEATURE_KEYS]:
        raise FormatError(f"{path}: unexpected feature table header")
    out = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != 2 + len(FEATURE_KEYS):
            raise FormatError(f"{path}:{line}: expected {2 + len(FEATURE_KEYS)} columns")
        try:
            out.append(SubjectFeatures(row[0], Label.parse(row[1]), [float(v) for v in row[2:]]))
        except ValueError as exc:
            raise FormatError(f"{path}:{line}: {exc}") from None
    return out


# --- reports ---------------------------------------------------------------


def _fixed(x: float) -> float:
    return float(f"{x:.{REPORT_DECIMALS}f}")


def report_to_dict(report: EvaluationReport) -> dict[str, Any]:
    runs = []
    for r in report.runs:
        runs.append(
            {
                "run": r.run,
                "seed": r.seed,
                "tp": r.counts.tp,
                "tn": r.counts.tn,
                "fp": r.counts.fp,
                "fn": r.counts.fn,
                **{k: _fixed(v) for k, v in r.metrics.as_dict().items()},
                "undefined": list(r.metrics.undefined),
            }
        )
    return {
        "software": {"name": "tepclass", "version": __version__},
        "config": report.config,
        "n_subjects": report.n_subjects,
        "n_runs": len(report.runs),
        "averaged": {k: _fixed(report.averaged[k]) for k in METRIC_KEYS},
        "runs": runs,
    }


def write_report(report: EvaluationReport, path, format: str = "json") -> None:
    """Serialize deterministically; equal reports give equal bytes."""
    if format == "json":
        text = json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    elif format == "csv":
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["run", "seed", "tp", "tn", "fp", "fn", *METRIC_KEYS])
        for r in report.runs:
            c = r.counts
            w.writerow(
                [r.run, r.seed, c.tp, c.tn, c.fp, c.fn]
                + [f"{r.metrics.as_dict()[k]:.{REPORT_DECIMALS}f}" for k in METRIC_KEYS]
            )
        w.writerow(["averaged", "", "", "", "", ""] + [f"{report.averaged[k]:.{REPORT_DECIMALS}f}" for k in METRIC_KEYS])
        text = buf.getvalue()
    else:
        raise ValueError(f"unknown report format {format!r}")
    tmp = Path(f"{path}.tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def read_report(path) -> dict[str, Any]:
    return json.loads(Path(path).read_text())
