import numpy as np
import pytest
import pywt
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aewave.errors import DataError, DegenerateSignal
from aewave.signal_core import Waveform
from aewave.wavelet import (
    DB4_DEC_LO,
    BandSpec,
    band_energy,
    band_energy_series,
    cwt_morlet,
    dwt_db4,
    idwt_db4,
    scale_to_frequency,
    scales_for_band,
    wavelet_features,
)

FS = 2e6


def morlet_gain(scale, omega, w0=6.0):
    return np.sqrt(2 * np.pi * scale) * np.pi**-0.25 * (
        np.exp(-0.5 * (scale * omega - w0) ** 2) - np.exp(-0.5 * (scale**2 * omega**2 + w0**2))
    )


def test_band_scales_hit_edges():
    band = BandSpec(25e3, 0.2, 8)
    s = scales_for_band(band, FS)
    f = scale_to_frequency(s, FS)
    assert f[0] == pytest.approx(30e3) and f[-1] == pytest.approx(20e3)
    assert np.all(np.diff(f) < 0)
    assert scale_to_frequency(scales_for_band(BandSpec(8e3, 0.2, 1), FS), FS)[0] == pytest.approx(8e3)


def test_band_outside_nyquist():
    with pytest.raises(DataError):
        scales_for_band(BandSpec(900e3), FS)


def test_cwt_of_tone_matches_wavelet_gain():
    # an analytic wavelet sees only the positive-frequency half of cos
    n = 1 << 15
    f0 = 25e3
    x = np.cos(2 * np.pi * f0 * np.arange(n) / FS)
    s = scales_for_band(BandSpec(25e3), FS)
    c = cwt_morlet(x, s)
    omega = 2 * np.pi * f0 / FS
    mid = slice(n // 4, 3 * n // 4)
    for row, sc in zip(c, s):
        np.testing.assert_allclose(np.abs(row[mid]), 0.5 * morlet_gain(sc, omega), rtol=1e-6)


def test_cwt_linearity_and_shift(rng):
    n = 1 << 14
    s = scales_for_band(BandSpec(44e3), FS)
    a, b = rng.normal(size=n), rng.normal(size=n)
    ca, cb = cwt_morlet(a, s), cwt_morlet(b, s)
    cab = cwt_morlet(2.0 * a - 3.0 * b, s)
    mid = slice(2000, n - 2000)
    ref = 2.0 * ca - 3.0 * cb
    assert np.max(np.abs(cab[:, mid] - ref[:, mid])) <= 1e-6 * np.max(np.abs(ref[:, mid]))
    k = 37
    shifted = cwt_morlet(np.roll(a, k), s)
    assert np.max(np.abs(shifted[:, 3000 : n - 3000] - ca[:, 3000 - k : n - 3000 - k])) <= 1e-6 * np.max(
        np.abs(ca)
    )


def test_cwt_chunking_is_invisible(rng):
    x = rng.normal(size=50_000)
    s = scales_for_band(BandSpec(8e3), FS)
    whole = cwt_morlet(x, s, chunk_size=1 << 20, overlap=1 << 14)
    parts = cwt_morlet(x, s, chunk_size=7_000, overlap=1 << 14)
    assert np.max(np.abs(whole - parts)) <= 1e-8 * np.max(np.abs(whole))


@pytest.mark.parametrize("chunk", [1 << 20, 9_000])
def test_fast_band_energy_matches_scalogram(rng, chunk):
    x = rng.normal(size=60_000)
    w = Waveform(x, FS)
    bands = [BandSpec(c) for c in (8e3, 16e3, 25e3, 44e3)]
    fast = band_energy_series(w, bands, chunk_size=chunk, overlap=1 << 14)
    for band, res in zip(bands, fast):
        ref = band_energy(cwt_morlet(x, res.scales, chunk_size=chunk, overlap=1 << 14))
        assert np.max(np.abs(res.energy - ref)) <= 1e-9 * ref.max()


def test_band_energy_threads_identical(rng):
    w = Waveform(rng.normal(size=80_000), FS)
    bands = [BandSpec(25e3), BandSpec(44e3)]
    one = band_energy_series(w, bands, chunk_size=10_000, overlap=4096, threads=1)
    four = band_energy_series(w, bands, chunk_size=10_000, overlap=4096, threads=4)
    for a, b in zip(one, four):
        assert a.energy.tobytes() == b.energy.tobytes()


def test_db4_filter_is_orthonormal():
    h = DB4_DEC_LO
    assert np.sum(h) == pytest.approx(np.sqrt(2), abs=1e-12)
    assert np.dot(h, h) == pytest.approx(1.0, abs=1e-12)
    for m in (1, 2, 3):
        assert np.dot(h[2 * m :], h[: -2 * m]) == pytest.approx(0.0, abs=1e-12)


def test_dwt_matches_pywavelets_periodization(rng):
    x = rng.normal(size=512)
    ours = dwt_db4(x, 3)
    ref = pywt.wavedec(x, "db4", mode="periodization", level=3)
    for a, b in zip(ours, ref):
        np.testing.assert_allclose(a, b, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(8, 64).flatmap(lambda m: arrays(np.float64, 8 * m, elements=st.floats(-100, 100))))
def test_dwt_perfect_reconstruction_and_energy(x):
    coeffs = dwt_db4(x, 3)
    e = float(np.dot(x, x))
    ce = sum(float(np.dot(c, c)) for c in coeffs)
    assert abs(ce - e) <= 1e-9 * e + 1e-12
    back = idwt_db4(coeffs, x.size)
    assert np.max(np.abs(back - x)) <= 1e-9 * max(np.max(np.abs(x)), 1e-300) + 1e-12


def test_dwt_odd_length_reconstructs(rng):
    x = rng.normal(size=203)
    np.testing.assert_allclose(idwt_db4(dwt_db4(x, 3), x.size), x, atol=1e-10)


def test_dwt_rejects_short_input():
    with pytest.raises(DataError):
        dwt_db4(np.ones(63), 3)


def test_wavelet_features_of_known_split():
    coeffs = [np.full(4, 1.0), np.zeros(4), np.zeros(8), np.full(16, 1.0)]
    f = wavelet_features(coeffs)
    assert f.energy_frac_a3 == pytest.approx(0.2)
    assert f.energy_frac_d1 == pytest.approx(0.8)
    assert f.wavelet_entropy == pytest.approx(-(0.2 * np.log(0.2) + 0.8 * np.log(0.8)))
    one = wavelet_features([np.ones(4), np.zeros(4), np.zeros(8), np.zeros(16)])
    assert one.wavelet_entropy == 0.0
    with pytest.raises(DegenerateSignal):
        wavelet_features([np.zeros(4), np.zeros(4), np.zeros(8), np.zeros(16)])
