"""Synthetic TMS-EEG recordings with a controllable AD/HC difference.

Each subject is a continuous recording holding ``n_trials`` pulses at
uniformly drawn inter-stimulus intervals. Every pulse adds an evoked
response (a sum of Gaussian components with alternating polarity, mapped
to channels by per-component topographies) and a short decaying pulse
transient. The background is per-channel 1/f noise with a white floor
plus a low-rank shared 1/f field. AD subjects get an amplitude and/or
latency shift on one component.

Units are microvolts. A subject's data is a pure function of the spec and
its position in the dataset.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from .datamodel import Label, RawRecording, SubjectRecord
from .errors import SynthError
from .io import write_manifest, write_recording
from .montage import standard_channels
from .rng import generator


@dataclass(frozen=True)
class Component:
    latency_ms: float
    width_ms: float
    amplitude: float
    topography_seed: int


DEFAULT_COMPONENTS = (
    Component(30.0, 5.0, 4.0, 101),
    Component(60.0, 10.0, 6.0, 102),
    Component(110.0, 15.0, 8.0, 103),
    Component(200.0, 25.0, 5.0, 104),
)


@dataclass(frozen=True)
class Effect:
    """Class difference applied to AD subjects.

    ``amp_shift`` reduces the magnitude of the target component (µV);
    ``latency_shift_ms`` delays it.
    """

    component: int = 2
    amp_shift: float = 0.0
    latency_shift_ms: float = 0.0


@dataclass(frozen=True)
class SynthSpec:
    n_ad: int = 17
    n_hc: int = 17
    n_trials: int = 120
    n_channels: int = 62
    fs_hz: float = 5000.0
    isi_s: tuple[float, float] = (2.0, 4.0)
    components: tuple[Component, ...] = DEFAULT_COMPONENTS
    effect: Effect = Effect()
    # per-subject variability
    amp_jitter: float = 0.1  # relative std of component amplitudes
    latency_jitter_ms: float = 2.0
    topo_jitter: float = 0.1  # relative std of per-channel gains
    diffuse_topography: bool = False  # equal-magnitude gains on every channel
    # background
    pink_scale: float = 3.0
    white_scale: float = 1.0
    shared_rank: int = 3
    shared_scale: float = 2.0
    pink_floor_hz: float = 0.5
    # pulse transient
    artifact_amp: float = 1000.0
    artifact_ms: float = 8.0
    master_seed: int = 0

    def validate(self) -> None:
        if self.n_ad < 1 or self.n_hc < 1:
            raise SynthError("subject counts must be positive")
        if self.n_trials < 1:
            raise SynthError("n_trials must be positive")
        if not 2 <= self.n_channels <= len(standard_channels()):
            raise SynthError(f"n_channels must lie in [2, {len(standard_channels())}]")
        if self.fs_hz <= 0:
            raise SynthError("fs_hz must be positive")
        lo, hi = self.isi_s
        if not 0 < lo <= hi:
            raise SynthError(f"invalid ISI range {self.isi_s}")
        # epochs of adjacent pulses must not overlap the next evoked response
        if lo < 1.5:
            raise SynthError("ISI below 1.5 s overlaps consecutive epochs")
        for c in self.components:
            if not 0 < c.latency_ms < 1000 or c.width_ms <= 0:
                raise SynthError(f"component {c} has latency outside (0, 1000) ms or bad width")
        if self.components and not 0 <= self.effect.component < len(self.components):
            raise SynthError(f"effect targets missing component {self.effect.component}")
        for name in ("pink_scale", "white_scale", "shared_scale", "amp_jitter",
                     "latency_jitter_ms", "topo_jitter", "artifact_amp"):  # fmt: skip
            if getattr(self, name) < 0:
                raise SynthError(f"{name} must be >= 0")
        if self.artifact_ms < 0 or self.shared_rank < 0:
            raise SynthError("artifact_ms and shared_rank must be >= 0")

    @property
    def channels(self) -> tuple[str, ...]:
        return standard_channels()[: self.n_channels]

    def subjects(self) -> list[tuple[str, Label]]:
        """``(id, label)`` in manifest order: AD subjects first, then HC."""
        return [(f"ad{i + 1:02d}", Label.AD) for i in range(self.n_ad)] + [
            (f"hc{i + 1:02d}", Label.HC) for i in range(self.n_hc)
        ]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthSpec":
        doc = dict(doc)
        if "components" in doc:
            doc["components"] = tuple(Component(**c) for c in doc["components"])
        if "effect" in doc:
            doc["effect"] = Effect(**doc["effect"])
        if "isi_s" in doc:
            doc["isi_s"] = tuple(doc["isi_s"])
        try:
            return cls(**doc)
        except TypeError as exc:
            raise SynthError(f"bad synth spec: {exc}") from None


def _gauss(t_ms: np.ndarray, latency: float, width: float) -> np.ndarray:
    return np.exp(-((t_ms - latency) ** 2) / (2.0 * width * width))


def _component_params(components, rng, amp_jitter, latency_jitter_ms):
    amps = np.array([c.amplitude for c in components], dtype=np.float64)
    lats = np.array([c.latency_ms for c in components], dtype=np.float64)
    if rng is not None and len(components):
        amps = amps * (1.0 + amp_jitter * rng.standard_normal(len(components)))
        lats = lats + latency_jitter_ms * rng.standard_normal(len(components))
    return amps, lats


def component_waveforms(components, fs: float, amps, lats, duration_ms: float = 1000.0) -> np.ndarray:
    """Signed unit-topography waveforms, one row per component."""
    n = int(round(fs * duration_ms / 1000.0))
    t_ms = np.arange(n) * (1000.0 / fs)
    rows = [
        (1.0 if k % 2 == 0 else -1.0) * a * _gauss(t_ms, lat, c.width_ms)
        for k, (c, a, lat) in enumerate(zip(components, amps, lats))
    ]
    return np.array(rows).reshape(len(rows), n)


def tep_template(
    components=DEFAULT_COMPONENTS,
    fs: float = 1000.0,
    rng: np.random.Generator | None = None,
    amp_jitter: float = 0.0,
    latency_jitter_ms: float = 0.0,
    duration_ms: float = 1000.0,
) -> np.ndarray:
    """Single-channel evoked waveform over ``[0, duration_ms)``.

    Component ``k`` contributes ``(-1)**k * amplitude * exp(-(t - latency)**2 / (2 width**2))``.
    With an ``rng``, amplitudes and latencies are jittered once per call.
    """
    amps, lats = _component_params(components, rng, amp_jitter, latency_jitter_ms)
    return component_waveforms(components, fs, amps, lats, duration_ms).sum(axis=0)


def topography(seed: int, n_channels: int, diffuse: bool = False) -> np.ndarray:
    """Fixed spatial gain pattern of a component, shared by all subjects.

    Gains are standard normal, so the pattern has both polarities and
    survives average referencing. ``diffuse`` keeps only the signs, which
    spreads the response evenly over the scalp.
    """
    g = generator(seed).standard_normal(n_channels)
    return np.where(g < 0, -1.0, 1.0) if diffuse else g


def noise_spectrum(n: int, fs: float, pink: float, white: float, floor_hz: float) -> np.ndarray:
    """Amplitude spectrum for :func:`colored_noise` of ``n`` samples.

    1/f power below ``floor_hz`` is held flat; DC is zero.
    """
    nf = n // 2 + 1
    f = np.arange(nf) * (fs / n)
    p_pink = 1.0 / np.maximum(f, floor_hz)
    p_white = np.ones(nf)
    power = np.zeros(nf)
    # irfft output variance is 4 / n**2 * sum(|X_k|**2) over positive bins
    for scale, p in ((pink, p_pink), (white, p_white)):
        p[0] = 0.0
        if scale > 0:
            power += (scale * scale) * p * (n * n / (4.0 * p.sum()))
    return np.sqrt(power).astype(np.float32)


def colored_noise(rng: np.random.Generator, n: int, amplitude: np.ndarray) -> np.ndarray:
    """Spectral synthesis: Gaussian Fourier coefficients shaped by ``amplitude``.

    ``amplitude`` comes from :func:`noise_spectrum` for an FFT length
    ``m >= n``; the first ``n`` samples of the length-``m`` series are
    returned.
    """
    nf = len(amplitude)
    m = 2 * (nf - 1)
    z = rng.standard_normal(2 * nf, dtype=np.float32).view(np.complex64)
    z *= amplitude
    return sfft.irfft(z, n=m)[:n]


def _pulse_samples(rng, spec: SynthSpec) -> tuple[np.ndarray, int]:
    fs = spec.fs_hz
    isi = rng.uniform(spec.isi_s[0], spec.isi_s[1], size=spec.n_trials - 1)
    onsets_s = 1.0 + np.concatenate([[0.0], np.cumsum(isi)])
    pulses = np.round(onsets_s * fs).astype(np.int64)
    n_samples = int(pulses[-1] + round(2.0 * fs))
    return pulses, n_samples


def generate_subject(spec: SynthSpec, index: int) -> tuple[SubjectRecord, RawRecording]:
    """Generate subject ``index`` (manifest position) of the dataset."""
    spec.validate()
    sid, label = spec.subjects()[index]
    rng = generator(spec.master_seed, index)
    fs, n_ch = spec.fs_hz, spec.n_channels
    pulses, n = _pulse_samples(rng, spec)

    m = sfft.next_fast_len(n + (n % 2), real=True)
    m += m % 2
    own = noise_spectrum(m, fs, spec.pink_scale, spec.white_scale, spec.pink_floor_hz)
    shared = None
    if spec.shared_rank and spec.shared_scale > 0:
        common = noise_spectrum(m, fs, spec.shared_scale, 0.0, spec.pink_floor_hz)
        shared = np.stack([colored_noise(rng, n, common) for _ in range(spec.shared_rank)])
        mixing = (rng.standard_normal((n_ch, spec.shared_rank)) / np.sqrt(spec.shared_rank)).astype(np.float32)
    data = np.empty((n_ch, n), dtype=np.float32)
    for ch in range(n_ch):
        data[ch] = colored_noise(rng, n, own)
        if shared is not None:
            data[ch] += mixing[ch] @ shared

    # evoked response for this subject
    comps = spec.components
    amps, lats = _component_params(comps, rng, spec.amp_jitter, spec.latency_jitter_ms)
    if label == Label.AD and comps:
        e = spec.effect
        a = amps[e.component]
        amps[e.component] = np.sign(a) * max(abs(a) - e.amp_shift, 0.0) if e.amp_shift else a
        lats[e.component] += e.latency_shift_ms
    gains = np.stack([topography(c.topography_seed, n_ch, spec.diffuse_topography) for c in comps], axis=1) if comps else np.zeros((n_ch, 0))
    gains = gains * (1.0 + spec.topo_jitter * rng.standard_normal(gains.shape))
    evoked = gains @ component_waveforms(comps, fs, amps, lats)

    n_art = int(round(fs * spec.artifact_ms / 1000.0))
    t_art = np.arange(n_art) / fs
    art_gain = 1.0 + 0.5 * rng.standard_normal(n_ch)
    artifact = spec.artifact_amp * art_gain[:, None] * np.exp(-t_art / 0.002)[None, :]

    for p in pulses:
        m = min(evoked.shape[1], n - p)
        data[:, p : p + m] += evoked[:, :m].astype(np.float32)
        a = min(n_art, n - p)
        data[:, p : p + a] += artifact[:, :a].astype(np.float32)

    rec = RawRecording(spec.channels, fs, data, pulses)
    return SubjectRecord(sid, label, f"{sid}.tepr"), rec


def generate_dataset(spec: SynthSpec, out_dir) -> Path:
    """Write every subject's recording plus ``manifest.json``; return the manifest path."""
    spec.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(spec.n_ad + spec.n_hc):
        record, rec = generate_subject(spec, i)
        write_recording(rec, out / record.path)
        records.append(record)
    manifest = out / "manifest.json"
    write_manifest(manifest, spec.fs_hz, spec.channels, records)
    (out / "synth_spec.json").write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")
    return manifest
