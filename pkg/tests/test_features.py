import numpy as np
import pytest
from scipy import stats

from aewave.errors import DataError, DegenerateSignal
from aewave.features import (
    CLUSTER_FEATURE_NAMES,
    FEATURE_NAMES,
    Standardizer,
    extract_cluster_features,
    extract_features,
    feature_matrix,
    read_feature_table,
    standardizer_apply,
    standardizer_fit,
    write_feature_table,
)
from aewave.signal_core import Segment

FS = 2e6


def burst(n=400, f0=25e3, amp=1.0):
    t = np.arange(n) / FS
    tau = (n / FS) / np.log(100.0)
    return Segment(amp * np.exp(-t / tau) * np.sin(2 * np.pi * f0 * t), FS)


def test_time_domain_features_against_scipy(rng):
    x = rng.normal(size=500) + 0.3 * rng.exponential(size=500)
    f = extract_features(Segment(x, FS))
    assert f.peak_amplitude == pytest.approx(np.max(np.abs(x)))
    assert f.rms == pytest.approx(np.sqrt(np.mean(x**2)))
    assert f.energy == pytest.approx(np.sum(x**2))
    assert f.crest_factor == pytest.approx(f.peak_amplitude / f.rms)
    assert f.skewness == pytest.approx(stats.skew(x), rel=1e-10)
    assert f.kurtosis == pytest.approx(stats.kurtosis(x, fisher=False), rel=1e-10)


def test_zcr_counts_sign_changes():
    x = np.tile([1.0, 1.0, -1.0, -1.0], 16)
    assert extract_features(x).zcr == pytest.approx(31 / 64)


def test_spectral_shape_of_pure_tone():
    n = 2000
    f0 = 25e3  # exactly 25 cycles in the window
    x = np.sin(2 * np.pi * f0 * np.arange(n) / FS)
    f = extract_features(Segment(x, FS))
    assert f.spectral_centroid_hz == pytest.approx(f0, rel=1e-6)
    # leakage-free bin: only rounding noise spreads the spectrum
    assert f.spectral_bandwidth_hz < 1.0
    assert f.spectral_entropy == pytest.approx(0.0, abs=1e-9)


def test_rise_and_decay_of_damped_burst():
    s = burst(n=400)
    f = extract_features(s)
    # envelope peaks near the start and falls to 10 % at ln(10)/ln(100) = half the support
    # a sine starting at zero needs part of a cycle for its envelope to peak
    assert f.rise_time_s < 40 / FS
    assert f.decay_time_s == pytest.approx(200 / FS, rel=0.1)


def test_features_are_amplitude_aware_where_expected():
    a = extract_features(burst(amp=1.0)).as_dict()
    b = extract_features(burst(amp=3.0)).as_dict()
    for k in ("peak_amplitude", "rms"):
        assert b[k] == pytest.approx(3 * a[k])
    assert b["energy"] == pytest.approx(9 * a["energy"])
    for k in ("crest_factor", "kurtosis", "skewness", "zcr", "spectral_centroid_hz", "spectral_entropy"):
        assert b[k] == pytest.approx(a[k], rel=1e-9)


def test_cluster_features():
    # 12 whole cycles, so the envelope does not see a wrap-around jump
    s = burst(n=545, f0=44e3)
    c = extract_cluster_features(s)
    assert c.duration_s == pytest.approx(545 / FS)
    assert 0 <= c.rise_frac < 0.1 and 0.3 < c.decay_frac < 0.7
    fr = [c.energy_frac_d1, c.energy_frac_d2, c.energy_frac_d3, c.energy_frac_a3]
    assert sum(fr) == pytest.approx(1.0, abs=1e-12)
    # 44 kHz at 2 MHz sits in the approximation band of a level-3 split (< 125 kHz)
    assert c.energy_frac_a3 > 0.95
    assert c.spectral_centroid_khz == pytest.approx(extract_features(s).spectral_centroid_hz / 1e3)


def test_feature_errors():
    with pytest.raises(DataError):
        extract_features(np.ones(31))
    with pytest.raises(DegenerateSignal):
        extract_features(np.zeros(64))
    with pytest.raises(DegenerateSignal):
        extract_features(np.ones(64))


def test_feature_matrix_shapes():
    segs = [burst(), burst(f0=8e3)]
    assert feature_matrix(segs).shape == (2, len(FEATURE_NAMES))
    assert feature_matrix(segs, "cluster").shape == (2, len(CLUSTER_FEATURE_NAMES))
    assert feature_matrix([], "cluster").shape == (0, len(CLUSTER_FEATURE_NAMES))
    with pytest.raises(DataError):
        feature_matrix(segs, "other")


def test_standardizer_matches_sklearn(rng):
    from sklearn.preprocessing import StandardScaler

    X = rng.normal(3.0, 2.0, size=(50, 4))
    z = standardizer_fit(X)
    np.testing.assert_allclose(z.apply(X), StandardScaler().fit_transform(X), atol=1e-12)
    np.testing.assert_allclose(standardizer_apply(z, X).mean(axis=0), 0.0, atol=1e-12)


def test_standardizer_drops_constant_columns(rng, caplog):
    X = np.column_stack([rng.normal(size=20), np.full(20, 7.0), rng.normal(size=20)])
    z = standardizer_fit(X, ["a", "b", "c"])
    assert z.dropped == ("b",) or list(z.dropped) == ["b"]
    assert z.apply(X).shape == (20, 2)
    assert "constant" in caplog.text
    back = Standardizer.from_dict(z.to_dict())
    np.testing.assert_array_equal(back.apply(X), z.apply(X))
    with pytest.raises(DataError):
        z.apply(X[:, :2])


def test_feature_table_round_trip(tmp_path, rng):
    X = rng.normal(size=(3, len(FEATURE_NAMES)))
    p = tmp_path / "f.csv"
    write_feature_table(p, X, FEATURE_NAMES, [1, 0, 0], ["e0", "n0", "n1"], "config_hash=abc")
    assert p.read_text().startswith("# config_hash=abc\n")
    X2, names, labels, ids = read_feature_table(p)
    assert X2.tobytes() == X.tobytes()
    assert list(names) == list(FEATURE_NAMES)
    assert [int(v) for v in labels] == [1, 0, 0] and list(ids) == ["e0", "n0", "n1"]
