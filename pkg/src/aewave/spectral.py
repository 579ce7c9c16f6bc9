"""Magnitude spectra, zero-phase Butterworth bandpass, Hilbert envelope and
spectral peak discovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft
from scipy import signal

from .errors import DataError
from .signal_core import Waveform

__all__ = [
    "Spectrum",
    "magnitude_spectrum",
    "zero_phase_bandpass",
    "arrival_bandpass",
    "hilbert_envelope",
    "find_band_peaks",
    "write_spectrum_csv",
]


@dataclass(frozen=True)
class Spectrum:
    """One-sided magnitude spectrum |X[k]| for k = 0..N//2."""

    freqs_hz: np.ndarray
    magnitude: np.ndarray
    n_samples: int

    def energy(self) -> float:
        """Time-domain energy recovered from the one-sided spectrum (Parseval)."""
        mag2 = self.magnitude ** 2
        n = self.n_samples
        weights = np.full(mag2.size, 2.0)
        weights[0] = 1.0
        if n % 2 == 0:
            weights[-1] = 1.0
        return float(np.sum(weights * mag2) / n)


def magnitude_spectrum(w) -> Spectrum:
    x = np.asarray(w.samples, dtype=np.float64)
    n = x.size
    if n < 2:
        raise DataError("magnitude spectrum needs at least 2 samples")
    mag = np.abs(np.fft.rfft(x))
    freqs = np.arange(mag.size) * (w.sample_rate_hz / n)
    return Spectrum(freqs, mag, n)


def _butter_sos(lo_hz, hi_hz, order, fs):
    if not (0 < lo_hz < hi_hz < fs / 2):
        raise DataError(f"invalid band edges [{lo_hz}, {hi_hz}] for fs={fs}")
    if order < 1:
        raise DataError("filter order must be >= 1")
    return signal.butter(order, [lo_hz, hi_hz], btype="bandpass", output="sos", fs=fs)


def _edge_padlen(lo_hz, fs, n):
    # three periods of the low cutoff: long enough for the high-pass
    # start-up transient to die out inside the padding
    return int(min(n - 1, np.ceil(3.0 * fs / lo_hz)))


def zero_phase_bandpass(w: Waveform, lo_hz: float, hi_hz: float, order: int = 4) -> Waveform:
    """Forward-backward Butterworth bandpass.

    The record is extended at both ends by even (mirror) reflection over
    three periods of the low cutoff. The result is the mean of the
    forward-backward and backward-forward passes. Both have zero phase in
    the interior; averaging them makes the edge transients mirror images of
    each other, so filtering a time-reversed record gives exactly the
    time-reversed output.
    """
    sos = _butter_sos(lo_hz, hi_hz, order, w.sample_rate_hz)
    x = np.asarray(w.samples, dtype=np.float64)
    padlen = _edge_padlen(lo_hz, w.sample_rate_hz, x.size)
    fb = signal.sosfiltfilt(sos, x, padtype="even", padlen=padlen)
    bf = signal.sosfiltfilt(sos, x[::-1], padtype="even", padlen=padlen)[::-1]
    return w.with_samples(0.5 * (fb + bf))


def arrival_bandpass(w: Waveform, lo_hz: float, hi_hz: float, order: int = 4) -> Waveform:
    """Bandpass that keeps sharp arrivals in place, for onset picking.

    The high-pass section runs forward only, so its long low-frequency
    response cannot leak ahead of an arrival the way a forward-backward pass
    does. The low-pass section runs forward-backward: its impulse response
    is short, so the symmetric spread it adds stays within a few samples
    and it adds no delay.
    """
    fs = w.sample_rate_hz
    _butter_sos(lo_hz, hi_hz, order, fs)
    hp = signal.butter(order, lo_hz, btype="highpass", output="sos", fs=fs)
    lp = signal.butter(order, hi_hz, btype="lowpass", output="sos", fs=fs)
    x = signal.sosfilt(hp, np.asarray(w.samples, dtype=np.float64))
    padlen = _edge_padlen(hi_hz, fs, x.size)
    return w.with_samples(signal.sosfiltfilt(lp, x, padtype="even", padlen=padlen))


def hilbert_envelope(s) -> np.ndarray:
    """Magnitude of the analytic signal.

    The segment is zero-padded to at least twice its length first, so the
    strong start of a burst does not wrap around into its quiet tail.
    """
    x = np.asarray(getattr(s, "samples", s), dtype=np.float64)
    if x.size < 8:
        raise DataError("Hilbert envelope needs at least 8 samples")
    n_fft = sfft.next_fast_len(2 * x.size)
    return np.abs(signal.hilbert(x, n_fft)[: x.size])


def find_band_peaks(
    spec: Spectrum,
    min_prominence_frac: float = 0.05,
    max_peaks: int = 4,
    smooth_hz: float = 100.0,
    fmin_hz: float = 0.0,
    fmax_hz: float | None = None,
) -> list[float]:
    """Centre frequencies of prominent spectral bumps.

    Peaks are located on a moving-average-smoothed log magnitude. Prominence
    is measured on the smoothed linear magnitude and compared against
    ``min_prominence_frac`` times its global maximum inside the search range.
    """
    mag = np.asarray(spec.magnitude, dtype=np.float64)
    freqs = np.asarray(spec.freqs_hz, dtype=np.float64)
    if mag.size == 0:
        return []
    df = freqs[1] - freqs[0] if freqs.size > 1 else 1.0
    width = max(1, int(round(smooth_hz / df)))
    tiny = np.finfo(float).tiny
    logmag = np.log(np.maximum(mag, tiny))
    if width > 1:
        logmag = np.convolve(logmag, np.ones(width) / width, mode="same")
    smooth = np.exp(logmag)
    sel = freqs >= fmin_hz
    if fmax_hz is not None:
        sel &= freqs <= fmax_hz
    idx_all = np.flatnonzero(sel)
    if idx_all.size < 3:
        return []
    sub = smooth[idx_all]
    gmax = sub.max()
    if gmax <= 0:
        return []
    peaks, props = signal.find_peaks(sub, prominence=min_prominence_frac * gmax)
    if peaks.size == 0:
        return []
    order = np.argsort(-props["prominences"], kind="stable")[:max_peaks]
    return [float(freqs[idx_all[peaks[i]]]) for i in order]


def write_spectrum_csv(spec: Spectrum, path, comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("freq_hz,magnitude\n")
        for f, m in zip(spec.freqs_hz, spec.magnitude):
            fh.write(f"{float(f)!r},{float(m)!r}\n")
