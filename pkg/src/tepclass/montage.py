"""Electrode-density sets and channel selection."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

from .datamodel import EpochSet
from .errors import MontageError

DENSITIES = ("low", "medium", "high")

# the 19 positions of the international 10-20 system (T3/T4/T5/T6 use 10-10 names)
TEN_TWENTY = (
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8",
    "T7", "C3", "Cz", "C4", "T8",
    "P7", "P3", "Pz", "P4", "P8",
    "O1", "O2",
)  # fmt: skip


@dataclass(frozen=True)
class Montage:
    name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(self.labels)
        if not labels:
            raise MontageError(f"montage {self.name!r} is empty")
        if len(set(labels)) != len(labels):
            raise MontageError(f"montage {self.name!r} has duplicate labels")
        object.__setattr__(self, "labels", labels)


def _data_json(name: str) -> dict:
    return json.loads(resources.files("tepclass").joinpath("data", name).read_text())


@lru_cache(maxsize=None)
def standard_channels() -> tuple[str, ...]:
    """The shipped 62-label 10-10 channel list, front to back, left to right."""
    rows = _data_json("channels_62.json")["rows"]
    return tuple(c for row in rows for c in row)


@lru_cache(maxsize=None)
def _medium_default() -> tuple[str, ...]:
    return tuple(_data_json("montage_medium.json")["labels"])


def builtin_montage(density: str, full_channel_list: Sequence[str] | None = None) -> Montage:
    """Return the low (10-20), medium (31 sites) or high (all channels) set.

    ``full_channel_list`` defaults to :func:`standard_channels`.
    """
    full = tuple(full_channel_list) if full_channel_list is not None else standard_channels()
    if density == "high":
        labels = full
    elif density == "low":
        labels = TEN_TWENTY
    elif density == "medium":
        labels = _medium_default()
    else:
        raise MontageError(f"unknown density {density!r} (expected one of {DENSITIES})")
    missing = [c for c in labels if c not in set(full)]
    if missing:
        raise MontageError(f"{density} montage labels absent from channel list: {', '.join(missing)}")
    return Montage(density, labels)


def load_montage(path) -> Montage:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
        return Montage(str(doc["name"]), tuple(str(c) for c in doc["labels"]))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise MontageError(f"cannot load montage from {path}: {exc}") from None


def resolve_montage(selector: str, full_channel_list: Sequence[str] | None = None) -> Montage:
    """Interpret ``low|medium|high`` or ``@path/to/montage.json``."""
    if selector.startswith("@"):
        m = load_montage(selector[1:])
        if full_channel_list is not None:
            missing = [c for c in m.labels if c not in set(full_channel_list)]
            if missing:
                raise MontageError(f"montage {m.name!r} labels absent: {', '.join(missing)}")
        return m
    return builtin_montage(selector, full_channel_list)


def select_channels(epochs: EpochSet, m: Montage) -> EpochSet:
    index = {c: i for i, c in enumerate(epochs.channels)}
    missing = [c for c in m.labels if c not in index]
    if missing:
        raise MontageError(f"montage {m.name!r} needs channels not in the data: {', '.join(missing)}")
    rows = [index[c] for c in m.labels]
    return EpochSet(m.labels, epochs.fs_hz, epochs.t0_index, epochs.data[:, rows, :])
