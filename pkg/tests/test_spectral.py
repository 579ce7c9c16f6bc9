import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import signal

from aewave.errors import DataError
from aewave.signal_core import Waveform
from aewave.spectral import (
    arrival_bandpass,
    find_band_peaks,
    hilbert_envelope,
    magnitude_spectrum,
    zero_phase_bandpass,
)

FS = 2e6


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(2, 513), elements=st.floats(-1e3, 1e3)))
def test_parseval(x):
    spec = magnitude_spectrum(Waveform(x, 1.0))
    e = float(np.dot(x, x))
    assert abs(spec.energy() - e) <= 1e-9 * max(e, 1e-300) + 1e-300


def test_spectrum_frequency_axis():
    spec = magnitude_spectrum(Waveform(np.ones(10), 100.0))
    np.testing.assert_allclose(spec.freqs_hz, np.arange(6) * 10.0)
    assert spec.magnitude[0] == pytest.approx(10.0)


def test_bandpass_time_reversal_symmetry(rng):
    x = rng.normal(size=40_000)
    w = Waveform(x, FS)
    fwd = zero_phase_bandpass(w, 2e3, 60e3).samples
    rev = zero_phase_bandpass(Waveform(x[::-1], FS), 2e3, 60e3).samples[::-1]
    assert np.max(np.abs(fwd - rev)) <= 1e-9 * np.max(np.abs(fwd))


@pytest.mark.parametrize("f0", [1e3, 8e3, 25e3, 44e3, 120e3])
def test_bandpass_interior_gain_is_squared_butterworth(f0):
    n = 400_000
    t = np.arange(n) / FS
    w = Waveform(np.cos(2 * np.pi * f0 * t), FS)
    y = zero_phase_bandpass(w, 2e3, 60e3).samples
    sos = signal.butter(4, [2e3, 60e3], btype="bandpass", output="sos", fs=FS)
    _, h = signal.sosfreqz(sos, worN=[f0], fs=FS)
    mid = slice(n // 4, 3 * n // 4)
    # zero phase: the output is the input scaled by |H|^2
    np.testing.assert_allclose(y[mid], abs(h[0]) ** 2 * w.samples[mid], atol=1e-6)


def test_bandpass_rejects_bad_edges():
    w = Waveform(np.zeros(100), FS)
    with pytest.raises(DataError):
        zero_phase_bandpass(w, 60e3, 2e3)
    with pytest.raises(DataError):
        zero_phase_bandpass(w, 2e3, 1.5e6)


def test_arrival_bandpass_does_not_precede_step():
    n = 20_000
    x = np.zeros(n)
    i0 = 10_000
    x[i0:] = np.sin(2 * np.pi * 25e3 * np.arange(n - i0) / FS)
    y = arrival_bandpass(Waveform(x, FS), 2e3, 60e3).samples
    z = zero_phase_bandpass(Waveform(x, FS), 2e3, 60e3).samples
    peak = np.max(np.abs(y))
    # leakage ahead of the arrival: only the short low-pass spread remains
    first_y = np.flatnonzero(np.abs(y) > 0.01 * peak)[0]
    first_z = np.flatnonzero(np.abs(z) > 0.01 * peak)[0]
    assert i0 - first_y < 50
    assert first_z < first_y


def test_hilbert_envelope_of_tone():
    t = np.arange(4000)
    env = hilbert_envelope(0.7 * np.cos(2 * np.pi * 0.05 * t))
    np.testing.assert_allclose(env[500:-500], 0.7, rtol=1e-3)


def test_find_band_peaks_locates_injected_bands(rng):
    n = 2_000_000
    x = 0.05 * rng.normal(size=n)
    for f in (8e3, 16e3, 25e3, 44e3):
        sos = signal.butter(2, [0.97 * f, 1.03 * f], btype="bandpass", output="sos", fs=FS)
        x += signal.sosfilt(sos, rng.normal(size=n))
    peaks = find_band_peaks(magnitude_spectrum(Waveform(x, FS)), fmin_hz=2e3, fmax_hz=60e3)
    assert len(peaks) == 4
    for f in (8e3, 16e3, 25e3, 44e3):
        assert min(abs(p - f) for p in peaks) < 1e3
