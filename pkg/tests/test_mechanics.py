import numpy as np
import pytest

from aewave.detection import AeEvent
from aewave.errors import DataError
from aewave.mechanics import (
    attach_stress_derivative,
    build_impulse_train,
    cross_correlate,
    cumulative_energy,
    nearest_index,
    regime_report,
    smoothed_derivative,
    two_line_fit,
)
from aewave.signal_core import AuxChannel


def ev(t_end, energy=1.0):
    return AeEvent(0, 1, frozenset({8e3}), float(energy), float(t_end))


def test_nearest_index_ties_go_early():
    grid = np.array([0.0, 1.0, 2.0, 3.0])
    np.testing.assert_array_equal(nearest_index(grid, [0.5, 1.5, 1.51, -4, 9, 2.0]), [0, 1, 2, 0, 3, 2])


def test_impulse_train_accumulates():
    grid = np.arange(5) * 0.1
    tr = build_impulse_train([ev(0.11, 2.0), ev(0.09, 3.0), ev(0.39, 1.0)], grid)
    np.testing.assert_allclose(tr.magnitudes, [0, 5, 0, 0, 1])


def test_derivative_of_line_is_exact():
    t = np.arange(0, 10, 0.01)
    d = smoothed_derivative(AuxChannel(t, 3.0 * t - 2.0, "stress"), 0.5)
    np.testing.assert_allclose(d.values, 3.0, atol=1e-9)


def test_derivative_window_too_small():
    t = np.arange(0, 1, 0.1)
    with pytest.raises(DataError):
        smoothed_derivative(AuxChannel(t, t, "stress"), 0.1)


def test_cross_correlation_recovers_lag(rng):
    a = rng.normal(size=500)
    b = np.concatenate([rng.normal(size=2), a[:-2]])  # b[t + 2] = a[t]
    lag, corr, lags, corrs = cross_correlate(a, b, 10)
    assert lag == 2 and corr > 0.999
    assert lags.size == 21 and corrs.size == 21
    lag, corr, *_ = cross_correlate(a, -a, 5)
    assert lag == 0 and corr == pytest.approx(-1.0)


def test_cross_correlation_tie_prefers_small_then_negative_lag():
    a = np.array([0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0])
    lag, corr, *_ = cross_correlate(a, a, 2)
    assert lag == 0 and corr == pytest.approx(1.0)
    with pytest.raises(DataError):
        cross_correlate(np.ones(5), a[:5], 1)


def test_cumulative_energy_in_time_order():
    t, c = cumulative_energy([ev(3.0, 1.0), ev(1.0, 2.0), ev(2.0, 4.0)])
    np.testing.assert_allclose(t, [1, 2, 3])
    np.testing.assert_allclose(c, [2, 6, 7])
    assert cumulative_energy([])[0].size == 0


def test_two_line_fit_exact_kink():
    t = np.arange(0, 120.0, 0.5)
    y = np.where(t < 67, 0.01 * t, 0.67 + 0.04 * (t - 67))
    fit = two_line_fit((t, y))
    assert fit.t_break_s == pytest.approx(67.0, abs=0.5)
    assert fit.slopes[0] == pytest.approx(0.01) and fit.slopes[1] == pytest.approx(0.04)
    assert fit.sse < 1e-20 < fit.single_line_sse


def test_two_line_fit_straight_line_returns_median_candidate():
    t = np.arange(100.0)
    fit = two_line_fit((t, 2 * t + 1))
    lo, hi = 5, 95
    # candidates lo..hi inclusive all tie; the median is returned
    assert fit.break_index == lo + (hi - lo) // 2


def test_regime_report_counts_and_fractions():
    events = [ev(t) for t in (1, 2, 3, 6, 7, 8, 9)]
    labels = [0, 1, 0, 1, 1, 0, 1]
    feats = {"spectral_centroid_hz": np.arange(7.0), "spectral_entropy": np.ones(7)}
    r = regime_report(events, feats, labels, 5.0, 0.0, 10.0)
    assert r["before"]["count"] == 3 and r["after"]["count"] == 4 and r["total"] == 7
    assert r["before"]["cluster_fractions"] == {0: 2 / 3, 1: 1 / 3}
    assert r["after"]["cluster_fractions"] == {0: 0.25, 1: 0.75}
    assert r["before"]["event_rate_per_s"] == pytest.approx(0.6)
    assert r["after"]["median_spectral_centroid_hz"] == pytest.approx(4.5)
    with pytest.raises(DataError):
        regime_report(events, None, None, 11.0, 0.0, 10.0)


def test_attach_stress_derivative():
    d = AuxChannel(np.array([0.0, 1.0, 2.0]), np.array([5.0, 6.0, 7.0]), "stress")
    np.testing.assert_allclose(attach_stress_derivative([ev(1.4), ev(1.6)], d), [6.0, 7.0])
