"""Epoching and signal conditioning of raw pulse-locked EEG.

Stage order: segment, excise the pulse window and bridge it with a cubic,
zero-phase band-pass, decimate, average reference. Everything here is
deterministic.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .datamodel import EpochSet, RawRecording
from .errors import PreprocessError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreprocessConfig:
    pre_ms: float = 500.0
    post_ms: float = 1000.0
    excise_ms: tuple[float, float] = (-2.0, 10.0)
    band_hz: tuple[float, float] = (1.0, 80.0)
    filter_order: int = 3
    decim_factor: int = 5

    def validate(self, fs_hz: float) -> None:
        if self.pre_ms <= 0 or self.post_ms <= 0:
            raise PreprocessError("pre_ms and post_ms must be positive")
        lo, hi = self.excise_ms
        if not lo <= 0 <= hi or lo >= hi:
            raise PreprocessError(f"excision window {self.excise_ms} must contain t=0")
        if -lo >= self.pre_ms or hi >= self.post_ms:
            raise PreprocessError("excision window exceeds the epoch")
        if self.filter_order < 1:
            raise PreprocessError("filter_order must be >= 1")
        if self.decim_factor < 1:
            raise PreprocessError("decim_factor must be >= 1")
        out_fs = fs_hz / self.decim_factor
        b_lo, b_hi = self.band_hz
        if not 0 < b_lo < b_hi < fs_hz / 2:
            raise PreprocessError(f"band {self.band_hz} Hz invalid for fs {fs_hz} Hz")
        if b_hi >= out_fs / 2:
            raise PreprocessError(
                f"band upper edge {b_hi} Hz is above the post-decimation Nyquist {out_fs / 2} Hz"
            )
        if abs(out_fs - round(out_fs)) > 1e-9:
            raise PreprocessError(f"decim_factor {self.decim_factor} does not divide fs {fs_hz}")

    def epoch_geometry(self, fs_hz: float) -> tuple[int, int]:
        """Return ``(n_samples, t0_index)`` of an epoch at ``fs_hz``."""
        n = int(round(fs_hz * (self.pre_ms + self.post_ms) / 1000.0))
        t0 = int(round(fs_hz * self.pre_ms / 1000.0))
        return n, t0


@dataclass
class ProcessingLog:
    n_pulses: int = 0
    n_dropped: int = 0
    timings_s: dict[str, float] = field(default_factory=dict)

    def _tick(self, stage: str, t_start: float) -> None:
        self.timings_s[stage] = self.timings_s.get(stage, 0.0) + time.perf_counter() - t_start


def _usable_pulses(raw: RawRecording, cfg: PreprocessConfig) -> tuple[np.ndarray, int, int]:
    n, t0 = cfg.epoch_geometry(raw.fs_hz)
    starts = raw.pulse_samples - t0
    ok = (starts >= 0) & (starts + n <= raw.n_samples)
    return starts[ok], n, t0


def segment(raw: RawRecording, cfg: PreprocessConfig = PreprocessConfig()) -> tuple[EpochSet, int]:
    """Cut one epoch per pulse.

    Pulses lacking a full pre- or post-window are dropped; the number
    dropped is returned alongside the epochs.
    """
    starts, n, t0 = _usable_pulses(raw, cfg)
    dropped = len(raw.pulse_samples) - len(starts)
    if dropped:
        log.warning("dropped %d pulse(s) with incomplete epoch windows", dropped)
    if len(starts) == 0:
        raise PreprocessError("no usable pulses in recording")
    data = np.stack([raw.data[:, s : s + n] for s in starts])
    return EpochSet(raw.channels, raw.fs_hz, t0, data), dropped


def _excision_bounds(n: int, t0_index: int, fs: float, excise_ms) -> tuple[int, int]:
    lo = t0_index + int(round(excise_ms[0] * fs / 1000.0))
    hi = t0_index + int(round(excise_ms[1] * fs / 1000.0))
    if lo - 2 < 0 or hi + 2 > n - 1:
        raise PreprocessError(
            f"excision window [{lo}, {hi}] needs two anchor samples on each side within [0, {n})"
        )
    return lo, hi


def _cubic_weights(lo: int, hi: int) -> np.ndarray:
    # Lagrange basis through anchors at relative positions -2, -1, w, w+1
    w = hi - lo + 1
    nodes = np.array([-2.0, -1.0, w, w + 1.0])
    pos = np.arange(w, dtype=np.float64)
    weights = np.ones((w, 4))
    for j in range(4):
        for m in range(4):
            if m != j:
                weights[:, j] *= (pos - nodes[m]) / (nodes[j] - nodes[m])
    return weights


def excise_interpolate(x: np.ndarray, t0_index: int, fs: float, excise_ms=(-2.0, 10.0)) -> np.ndarray:
    """Replace the pulse window with a cubic through two anchors per side.

    Works along the last axis; samples outside the window are returned
    unchanged.
    """
    x = np.asarray(x, dtype=np.float64)
    lo, hi = _excision_bounds(x.shape[-1], t0_index, fs, excise_ms)
    anchors = x[..., [lo - 2, lo - 1, hi + 1, hi + 2]]
    out = x.copy()
    out[..., lo : hi + 1] = anchors @ _cubic_weights(lo, hi).T
    return out


def _padlen(order: int) -> int:
    return 3 * (2 * order + 1)


def bandpass_zero_phase(x: np.ndarray, fs: float, band_hz=(1.0, 80.0), order: int = 3) -> np.ndarray:
    """Forward-backward Butterworth band-pass along the last axis.

    Ends are extended by odd reflection of ``3 * (2 * order + 1)`` samples
    before filtering and trimmed afterwards.
    """
    x = np.asarray(x, dtype=np.float64)
    lo, hi = band_hz
    if not 0 < lo < hi < fs / 2:
        raise PreprocessError(f"band {band_hz} Hz invalid for fs {fs} Hz")
    padlen = _padlen(order)
    if x.shape[-1] <= padlen:
        raise PreprocessError(f"series of {x.shape[-1]} samples too short for padding {padlen}")
    sos = _butter_sos(order, float(lo), float(hi), float(fs))
    return signal.sosfiltfilt(sos, x, axis=-1, padtype="odd", padlen=padlen)


_SOS_CACHE: dict[tuple, np.ndarray] = {}


def _butter_sos(order: int, lo: float, hi: float, fs: float) -> np.ndarray:
    key = (order, lo, hi, fs)
    if key not in _SOS_CACHE:
        _SOS_CACHE[key] = signal.butter(order, [lo, hi], btype="bandpass", fs=fs, output="sos")
    return _SOS_CACHE[key]


def decimate(x: np.ndarray, factor: int) -> np.ndarray:
    """Keep every ``factor``-th sample (no extra anti-alias filtering)."""
    if factor < 1:
        raise PreprocessError(f"decimation factor must be >= 1, got {factor}")
    return np.asarray(x)[..., ::factor]


def average_reference(epoch: np.ndarray) -> np.ndarray:
    """Subtract the instantaneous cross-channel mean (channels on axis -2)."""
    epoch = np.asarray(epoch, dtype=np.float64)
    if epoch.ndim < 2 or epoch.shape[-2] < 2:
        raise PreprocessError("average reference needs at least 2 channels")
    return epoch - epoch.mean(axis=-2, keepdims=True)


def preprocess_pipeline(
    raw: RawRecording,
    cfg: PreprocessConfig = PreprocessConfig(),
    plog: ProcessingLog | None = None,
) -> EpochSet:
    """Run every stage on ``raw`` and return float32 epochs at the decimated rate."""
    cfg.validate(raw.fs_hz)
    plog = plog if plog is not None else ProcessingLog()
    t = time.perf_counter()
    starts, n, t0 = _usable_pulses(raw, cfg)
    plog.n_pulses = len(raw.pulse_samples)
    plog.n_dropped = plog.n_pulses - len(starts)
    if plog.n_dropped:
        log.warning("dropped %d pulse(s) with incomplete epoch windows", plog.n_dropped)
    if len(starts) == 0:
        raise PreprocessError("no usable pulses in recording")
    fs = raw.fs_hz
    _excision_bounds(n, t0, fs, cfg.excise_ms)
    if t0 % cfg.decim_factor:
        raise PreprocessError(f"pulse sample {t0} is not kept by decimation factor {cfg.decim_factor}")
    n_out = -(-n // cfg.decim_factor)
    out = np.empty((len(starts), len(raw.channels), n_out), dtype=np.float32)
    plog._tick("segment", t)
    # one trial at a time keeps peak memory at a single epoch
    for i, s in enumerate(starts):
        t = time.perf_counter()
        trial = excise_interpolate(raw.data[:, s : s + n], t0, fs, cfg.excise_ms)
        plog._tick("excise", t)
        t = time.perf_counter()
        trial = bandpass_zero_phase(trial, fs, cfg.band_hz, cfg.filter_order)
        plog._tick("filter", t)
        t = time.perf_counter()
        trial = decimate(trial, cfg.decim_factor)
        plog._tick("decimate", t)
        t = time.perf_counter()
        out[i] = average_reference(trial)
        plog._tick("reference", t)
    return EpochSet(raw.channels, fs / cfg.decim_factor, t0 // cfg.decim_factor, out)
