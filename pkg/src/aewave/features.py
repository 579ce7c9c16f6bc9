"""Per-segment features and column standardisation.

Two feature sets are computed from an event or non-event snippet:

* the 12 classification features (:data:`FEATURE_NAMES`), and
* the clustering vector (:data:`CLUSTER_FEATURE_NAMES`), which adds envelope
  timing fractions and DB4 sub-band energy fractions.

Spectral quantities use the unwindowed one-sided ``|FFT|`` of the
RMS-normalised segment, with ``p = S / sum(S)`` for the entropy.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateSignal
from .spectral import hilbert_envelope
from .wavelet import dwt_db4, wavelet_features

__all__ = [
    "FEATURE_NAMES",
    "CLUSTER_FEATURE_NAMES",
    "FeatureVector",
    "ClusterFeatureVector",
    "Standardizer",
    "extract_features",
    "extract_cluster_features",
    "feature_matrix",
    "standardizer_fit",
    "standardizer_apply",
    "write_feature_table",
    "read_feature_table",
]

log = logging.getLogger(__name__)

MIN_SEGMENT = 32
DEFAULT_ENVELOPE_FRAC = 0.10

FEATURE_NAMES = (
    "peak_amplitude",
    "rms",
    "energy",
    "crest_factor",
    "kurtosis",
    "skewness",
    "zcr",
    "rise_time_s",
    "decay_time_s",
    "spectral_centroid_hz",
    "spectral_bandwidth_hz",
    "spectral_entropy",
)

CLUSTER_FEATURE_NAMES = (
    "duration_s",
    "rise_frac",
    "decay_frac",
    "kurtosis_rmsnorm",
    "zcr_per_s",
    "spectral_centroid_khz",
    "spectral_bandwidth_khz",
    "spectral_entropy",
    "energy_frac_d1",
    "energy_frac_d2",
    "energy_frac_d3",
    "energy_frac_a3",
    "wavelet_entropy",
)


@dataclass(frozen=True)
class FeatureVector:
    peak_amplitude: float
    rms: float
    energy: float
    crest_factor: float
    kurtosis: float
    skewness: float
    zcr: float
    rise_time_s: float
    decay_time_s: float
    spectral_centroid_hz: float
    spectral_bandwidth_hz: float
    spectral_entropy: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in FEATURE_NAMES}

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in FEATURE_NAMES], dtype=np.float64)


@dataclass(frozen=True)
class ClusterFeatureVector:
    duration_s: float
    rise_frac: float
    decay_frac: float
    kurtosis_rmsnorm: float
    zcr_per_s: float
    spectral_centroid_khz: float
    spectral_bandwidth_khz: float
    spectral_entropy: float
    energy_frac_d1: float
    energy_frac_d2: float
    energy_frac_d3: float
    energy_frac_a3: float
    wavelet_entropy: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in CLUSTER_FEATURE_NAMES}

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in CLUSTER_FEATURE_NAMES], dtype=np.float64)


# --------------------------------------------------------------------------
# building blocks


def _samples(s):
    x = np.asarray(getattr(s, "samples", s), dtype=np.float64)
    fs = float(getattr(s, "sample_rate_hz", 1.0))
    if x.size < MIN_SEGMENT:
        raise DataError(f"feature extraction needs at least {MIN_SEGMENT} samples, got {x.size}")
    return x, fs


def _moments(x):
    """Population skewness and (non-excess) kurtosis."""
    d = x - x.mean()
    m2 = np.mean(d * d)
    if m2 == 0:
        raise DegenerateSignal("constant segment has undefined higher moments")
    skew = np.mean(d**3) / m2**1.5
    kurt = np.mean(d**4) / m2**2
    return float(skew), float(kurt)


def _sign_changes(x) -> int:
    # zeros count as positive so that an exact zero is not a crossing by itself
    neg = np.signbit(x)
    return int(np.count_nonzero(neg[1:] != neg[:-1]))


def _envelope_times(x, fs, frac):
    """Rise and decay times of the Hilbert envelope in seconds.

    Onset is the first sample at or above ``frac`` of the envelope peak and
    the end is the last such sample.
    """
    env = hilbert_envelope(x)
    ip = int(np.argmax(env))
    above = np.flatnonzero(env >= frac * env[ip])
    return (ip - above[0]) / fs, (above[-1] - ip) / fs


def _spectral_shape(x, fs):
    """Centroid (Hz), bandwidth (Hz) and entropy (nats) of ``|FFT(x)|``."""
    rms = np.sqrt(np.mean(x * x))
    mag = np.abs(np.fft.rfft(x / rms))
    freqs = np.fft.rfftfreq(x.size, d=1.0 / fs)
    total = mag.sum()
    p = mag / total
    centroid = float(np.dot(freqs, p))
    bandwidth = float(np.sqrt(np.dot((freqs - centroid) ** 2, p)))
    nz = p[p > 0]
    entropy = float(-np.sum(nz * np.log(nz)))
    return centroid, bandwidth, max(entropy, 0.0)


# --------------------------------------------------------------------------
# extraction


def extract_features(s, envelope_frac: float = DEFAULT_ENVELOPE_FRAC) -> FeatureVector:
    """The 12 classification features of a segment.

    Parameters
    ----------
    s : Segment or array_like
        Snippet to describe. A bare array is treated as sampled at 1 Hz.
    envelope_frac : float
        Fraction of the envelope peak that defines onset and end for the
        rise and decay times.

    Returns
    -------
    FeatureVector
    """
    x, fs = _samples(s)
    energy = float(np.dot(x, x))
    rms = np.sqrt(energy / x.size)
    if rms == 0:
        raise DegenerateSignal("zero-RMS segment")
    peak = float(np.max(np.abs(x)))
    skew, kurt = _moments(x)
    rise, decay = _envelope_times(x, fs, envelope_frac)
    centroid, bandwidth, entropy = _spectral_shape(x, fs)
    return FeatureVector(
        peak_amplitude=peak,
        rms=float(rms),
        energy=energy,
        crest_factor=float(peak / rms),
        kurtosis=kurt,
        skewness=skew,
        zcr=_sign_changes(x) / x.size,
        rise_time_s=float(rise),
        decay_time_s=float(decay),
        spectral_centroid_hz=centroid,
        spectral_bandwidth_hz=bandwidth,
        spectral_entropy=entropy,
    )


def extract_cluster_features(s, envelope_frac: float = DEFAULT_ENVELOPE_FRAC, dwt_level: int = 3):
    """Morphology plus DB4 sub-band descriptors used for clustering."""
    x, fs = _samples(s)
    rms = np.sqrt(np.mean(x * x))
    if rms == 0:
        raise DegenerateSignal("zero-RMS segment")
    xn = x / rms
    duration = x.size / fs
    rise, decay = _envelope_times(xn, fs, envelope_frac)
    _, kurt = _moments(xn)
    centroid, bandwidth, entropy = _spectral_shape(x, fs)
    dwt = wavelet_features(dwt_db4(x, dwt_level))
    return ClusterFeatureVector(
        duration_s=duration,
        rise_frac=float(rise / duration),
        decay_frac=float(decay / duration),
        kurtosis_rmsnorm=kurt,
        zcr_per_s=_sign_changes(x) / duration,
        spectral_centroid_khz=centroid / 1e3,
        spectral_bandwidth_khz=bandwidth / 1e3,
        spectral_entropy=entropy,
        energy_frac_d1=dwt.energy_frac_d1,
        energy_frac_d2=dwt.energy_frac_d2,
        energy_frac_d3=dwt.energy_frac_d3,
        energy_frac_a3=dwt.energy_frac_a3,
        wavelet_entropy=dwt.wavelet_entropy,
    )


def feature_matrix(segments, kind: str = "classify", **kw) -> np.ndarray:
    """Stack per-segment features into an ``(n, d)`` float array."""
    fn = {"classify": extract_features, "cluster": extract_cluster_features}.get(kind)
    if fn is None:
        raise DataError(f"unknown feature set {kind!r}")
    names = FEATURE_NAMES if kind == "classify" else CLUSTER_FEATURE_NAMES
    rows = [fn(s, **kw).as_array() for s in segments]
    if not rows:
        return np.zeros((0, len(names)))
    return np.vstack(rows)


# --------------------------------------------------------------------------
# standardisation


@dataclass(frozen=True)
class Standardizer:
    """Column means and population standard deviations of a training matrix.

    ``keep`` lists the input column indices that survive; constant columns
    are dropped at fit time and recorded in ``dropped``.
    """

    mean: np.ndarray
    std: np.ndarray
    keep: np.ndarray
    n_features_in: int
    dropped: tuple = field(default_factory=tuple)

    def apply(self, X) -> np.ndarray:
        return standardizer_apply(self, X)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "keep": self.keep.tolist(),
            "n_features_in": self.n_features_in,
            "dropped": list(self.dropped),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(
            np.asarray(d["mean"], dtype=np.float64),
            np.asarray(d["std"], dtype=np.float64),
            np.asarray(d["keep"], dtype=np.int64),
            int(d["n_features_in"]),
            tuple(d.get("dropped", ())),
        )


def standardizer_fit(X, names=None) -> Standardizer:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("standardizer needs a 2-D matrix with at least 2 rows")
    if not np.all(np.isfinite(X)):
        raise DataError("feature matrix contains non-finite values")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    # a column is constant when its spread is at rounding level of its values
    scale = np.maximum(np.abs(mean), np.finfo(float).tiny)
    const = std <= 1e-12 * scale
    if names is None:
        names = [str(i) for i in range(X.shape[1])]
    dropped = tuple(names[i] for i in np.flatnonzero(const))
    if dropped:
        log.warning("dropping constant feature columns: %s", ", ".join(dropped))
    keep = np.flatnonzero(~const)
    if keep.size == 0:
        raise DegenerateSignal("every feature column is constant")
    return Standardizer(mean[keep], std[keep], keep, X.shape[1], dropped)


def standardizer_apply(z: Standardizer, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != z.n_features_in:
        raise DataError(f"expected {z.n_features_in} feature columns, got {X.shape[1]}")
    return (X[:, z.keep] - z.mean) / z.std


# --------------------------------------------------------------------------
# feature table


def write_feature_table(path, X, names, labels=None, event_ids=None, comment=None) -> None:
    """CSV with the feature columns followed by ``label`` and ``event_id``."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    labels = [""] * n if labels is None else list(labels)
    event_ids = list(range(n)) if event_ids is None else list(event_ids)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(list(names) + ["label", "event_id"])
        for row, lab, eid in zip(X, labels, event_ids):
            wr.writerow([repr(float(v)) for v in row] + [lab, eid])


def read_feature_table(path):
    """Inverse of :func:`write_feature_table`: ``(X, names, labels, event_ids)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise DataError(f"{path}: empty feature table")
    header = rows[0]
    if header[-2:] != ["label", "event_id"]:
        raise DataError(f"{path}: expected trailing label,event_id columns")
    names = header[:-2]
    body = rows[1:]
    X = np.array([[float(v) for v in r[:-2]] for r in body], dtype=np.float64).reshape(len(body), len(names))
    labels = [r[-2] for r in body]
    event_ids = [r[-1] for r in body]
    return X, names, labels, event_ids
