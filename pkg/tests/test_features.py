import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tepclass.datamodel import FEATURE_KEYS, EpochSet, Label
from tepclass.errors import FeatureError
from tepclass.features import (
    PeakWindows,
    auc,
    descriptive_stats,
    energy,
    gmfp,
    hjorth,
    normalize_trial,
    peak_amplitudes,
    subject_feature_vector,
)
from tepclass.montage import Montage, builtin_montage, standard_channels


# --- normalization -----------------------------------------------------------


def test_normalize_halves_unit_trial():
    x = np.tile([2.0, -2.0], (3, 50))  # baseline mean 0, global std 2
    np.testing.assert_allclose(normalize_trial(x, 20), x / 2)


def test_normalize_flat_trial():
    with pytest.raises(FeatureError, match="trial 7"):
        normalize_trial(np.full((4, 100), 3.0), 50, trial=7)


def test_normalize_unit_std(rng):
    out = normalize_trial(rng.standard_normal((62, 1500)) * 5 + 3, 500)
    assert abs(out.std() - 1) < 1e-9
    np.testing.assert_allclose(out[:, :500].mean(axis=1), 0, atol=1e-12)


# --- descriptive stats ---------------------------------------------------------


def _moments_by_hand(x):
    n = len(x)
    mu = sum(x) / n
    m2 = sum((v - mu) ** 2 for v in x) / n
    m3 = sum((v - mu) ** 3 for v in x) / n
    m4 = sum((v - mu) ** 4 for v in x) / n
    return m3 / m2**1.5, m4 / m2**2 - 3


def test_descriptive_pair():
    mx, mn, mean, skew, kurt = descriptive_stats(np.array([1.0, -1.0]))
    assert (mx, mn, mean, skew, kurt) == (1.0, -1.0, 0.0, 0.0, -2.0)


def test_descriptive_matches_hand(rng):
    x = rng.gamma(2.0, size=200)
    _, _, _, skew, kurt = descriptive_stats(x)
    s, k = _moments_by_hand(x.tolist())
    assert skew == pytest.approx(s, rel=1e-10) and kurt == pytest.approx(k, rel=1e-10)


def test_descriptive_symmetry(rng):
    x = rng.gamma(2.0, size=100)
    a, b = descriptive_stats(x), descriptive_stats(-x)
    assert a[0] == -b[1] and a[1] == -b[0]
    assert a[3] == pytest.approx(-b[3]) and a[4] == pytest.approx(b[4])


def test_descriptive_gaussian_moments():
    x = np.random.default_rng(2024).standard_normal(100_000)
    _, _, _, skew, kurt = descriptive_stats(x)
    assert abs(skew) < 0.1 and abs(kurt) < 0.2


def test_descriptive_constant_and_empty():
    *_, skew, kurt = descriptive_stats(np.full(10, 4.0))
    assert skew == 0 and kurt == 0
    with pytest.raises(FeatureError):
        descriptive_stats(np.array([1.0]))


# --- Hjorth ----------------------------------------------------------------------


def _hjorth_by_hand(x):
    d = [b - a for a, b in zip(x, x[1:])]
    dd = [b - a for a, b in zip(d, d[1:])]
    v0, v1, v2 = statistics.pvariance(x), statistics.pvariance(d), statistics.pvariance(dd)
    mob = math.sqrt(v1 / v0)
    return v0, mob, math.sqrt(v2 / v1) / mob


def test_hjorth_sinusoid_mobility():
    t = np.arange(1000) / 1000.0
    x = np.sin(2 * np.pi * 10 * t)
    hj = hjorth(x)
    expected = 2 * math.sin(math.pi * 10 / 1000)
    assert hj.mobility == pytest.approx(expected, rel=0.01)
    assert hj.mobility == pytest.approx(_hjorth_by_hand(x.tolist())[1], rel=1e-9)
    assert hj.complexity == pytest.approx(1.0, rel=0.01)


@pytest.mark.parametrize("freq,phase", [(3.0, 0.0), (17.0, 1.0), (42.0, 2.5)])
def test_hjorth_sinusoid_complexity(freq, phase):
    t = np.arange(1000) / 1000.0
    assert hjorth(np.sin(2 * np.pi * freq * t + phase)).complexity == pytest.approx(1.0, rel=0.01)


def test_hjorth_matches_hand(rng):
    x = rng.standard_normal(300)
    hj = hjorth(x)
    for got, want in zip(hj[:3], _hjorth_by_hand(x.tolist())):
        assert got == pytest.approx(want, rel=1e-9)


def test_hjorth_scale_law(rng):
    x = rng.standard_normal(500)
    a, b = hjorth(x), hjorth(5 * x)
    assert b.activity == pytest.approx(25 * a.activity, rel=1e-9)
    assert abs(b.mobility - a.mobility) < 1e-9 and abs(b.complexity - a.complexity) < 1e-9


def test_hjorth_degenerate():
    for x in (np.full(50, 2.0), np.arange(50.0)):
        hj = hjorth(x)
        assert (hj.activity, hj.mobility, hj.complexity) == (0, 0, 0) and hj.degenerate


# --- energy / peaks / gmfp / auc ---------------------------------------------------


def test_energy():
    assert energy(np.array([1.0, -2.0, 2.0])) == 9.0
    assert energy(np.zeros(5)) == 0.0


def test_peaks_impulse():
    x = np.zeros(1000)
    x[100] = 1.0
    assert peak_amplitudes(x, 1000.0) == (0.0, 0.0, 1.0, 0.0)


def test_peaks_polarity_and_abs(rng):
    x = rng.standard_normal(1000)
    assert peak_amplitudes(x, 1000.0) == peak_amplitudes(-x, 1000.0)
    y = np.zeros(1000)
    y[30], y[31] = 0.5, -0.9
    assert peak_amplitudes(y, 1000.0)[0] == 0.9


def test_peaks_inclusive_bounds():
    for edge in (25, 40):
        x = np.zeros(1000)
        x[edge] = 2.0
        assert peak_amplitudes(x, 1000.0)[0] == 2.0
    x = np.zeros(1000)
    x[41] = 2.0
    assert peak_amplitudes(x, 1000.0)[0] == 0.0


def test_peaks_window_outside():
    with pytest.raises(FeatureError):
        peak_amplitudes(np.zeros(200), 1000.0)


def test_peak_windows_validation():
    with pytest.raises(FeatureError):
        PeakWindows(p2=(30.0, 50.0))


def test_gmfp_examples(rng):
    a = 2.5
    assert gmfp(np.array([[a], [-a]]))[0] == a
    assert gmfp(np.full((5, 3), 1.7)).tolist() == [0.0, 0.0, 0.0]
    x = rng.standard_normal((62, 200))
    x -= x.mean(axis=0)
    rms = np.sqrt(np.mean(x**2, axis=0))
    assert np.max(np.abs(gmfp(x) - rms)) < 1e-9
    y = rng.standard_normal((10, 50))
    np.testing.assert_allclose(gmfp(y), y.std(axis=0), rtol=1e-12)
    with pytest.raises(FeatureError):
        gmfp(np.ones((1, 10)))


def test_auc_examples():
    assert auc(np.ones(1000), 1000.0) == 0.999
    assert auc(np.zeros(50), 1000.0) == 0.0
    assert auc(np.array([0.0, 1.0, 0.0]), 1000.0) == pytest.approx(0.001, abs=1e-18)
    with pytest.raises(FeatureError):
        auc(np.ones(1), 1000.0)


# --- subject vector ------------------------------------------------------------------


def _epochs(rng, n_trials=3, n_ch=62):
    data = rng.standard_normal((n_trials, n_ch, 1500))
    data[:, :, 520:560] += 3 * np.sin(np.linspace(0, np.pi, 40))
    return EpochSet(standard_channels()[:n_ch], 1000.0, 500, data)


def test_single_trial_single_channel(rng):
    ep = _epochs(rng, n_trials=1)
    f = subject_feature_vector(ep, Montage("cz", ("Cz",)))
    norm = normalize_trial(ep.data[0], 500)
    post = norm[ep.channels.index("Cz"), 500:]
    hj = hjorth(post)
    expect = [*descriptive_stats(post), hj.activity, hj.mobility, hj.complexity, energy(post),
              *peak_amplitudes(post, 1000.0), 0.0]  # fmt: skip
    np.testing.assert_allclose(f.values, np.array(expect, dtype=float), rtol=1e-12, atol=1e-12)


def test_duplicating_trials(rng):
    ep = _epochs(rng)
    doubled = EpochSet(ep.channels, ep.fs_hz, ep.t0_index, np.concatenate([ep.data, ep.data]))
    m = builtin_montage("low")
    np.testing.assert_allclose(
        subject_feature_vector(doubled, m).values, subject_feature_vector(ep, m).values, rtol=1e-12
    )


def test_polarity_flip(rng):
    ep = _epochs(rng)
    neg = EpochSet(ep.channels, ep.fs_hz, ep.t0_index, -ep.data)
    m = builtin_montage("medium")
    a = subject_feature_vector(ep, m).as_dict()
    b = subject_feature_vector(neg, m).as_dict()
    for k in ("activity", "mobility", "complexity", "energy", "p1", "p2", "p3", "p4", "kurtosis", "auc_gmfp"):
        assert b[k] == pytest.approx(a[k], rel=1e-12), k
    assert b["mean"] == pytest.approx(-a["mean"], abs=1e-12)
    assert b["skew"] == pytest.approx(-a["skew"], rel=1e-12)
    assert b["max"] == pytest.approx(-a["min"], rel=1e-12)


def test_channel_permutation(rng):
    ep = _epochs(rng)
    m = builtin_montage("low")
    perm = Montage("p", tuple(np.random.default_rng(1).permutation(m.labels)))
    a, b = subject_feature_vector(ep, m).values, subject_feature_vector(ep, perm).values
    assert np.max(np.abs(a - b)) <= 1e-9


def test_vector_shape_and_determinism(rng):
    ep = _epochs(rng, n_trials=5)
    a = subject_feature_vector(ep, builtin_montage("high"), subject_id="s1", label=Label.AD)
    b = subject_feature_vector(ep, builtin_montage("high"), subject_id="s1", label=Label.AD)
    assert a.values.shape == (14,) and np.all(np.isfinite(a.values))
    assert a.values.tobytes() == b.values.tobytes()
    assert list(a.as_dict()) == list(FEATURE_KEYS)


def test_no_trials():
    ep = EpochSet(standard_channels(), 1000.0, 500, np.zeros((0, 62, 1500)))
    with pytest.raises(FeatureError, match="no trials"):
        subject_feature_vector(ep, builtin_montage("high"))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 300), elements=st.floats(-100, 100)))
def test_nonnegative_features(x):
    if np.ptp(x) < 1e-6:
        return
    post = x
    hj = hjorth(post)
    assert np.all(hj.activity >= 0) and np.all(energy(post) >= 0)
    assert all(np.all(p >= 0) for p in peak_amplitudes(post, 1000.0))
    assert np.all(gmfp(post) >= 0)


def test_multi_montage_matches_single(epochs_62):
    from tepclass.features import montage_feature_vectors
    from tepclass.montage import builtin_montage

    montages = [builtin_montage(m) for m in ("low", "medium", "high")]
    multi = montage_feature_vectors(epochs_62, montages, subject_id="s1")
    for m in montages:
        single = subject_feature_vector(epochs_62, m, subject_id="s1")
        assert np.array_equal(multi[m.name].values, single.values)
