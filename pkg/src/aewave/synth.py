"""Synthetic AE records with known ground truth.

A record is white Gaussian noise plus band-centred bursts. Optional stress
and strain channels are coupled to the bursts: stress is a ramp that drops
in proportion to each burst's energy, and strain changes slope at a
configured break time.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .signal_core import AuxChannel, Waveform

__all__ = [
    "BurstSpec",
    "SynthSpec",
    "TruthEvent",
    "SynthRecord",
    "MatchResult",
    "generate",
    "truth_match",
    "inband_noise_rms",
    "write_truth_json",
    "read_truth_json",
]


@dataclass(frozen=True)
class BurstSpec:
    onset_s: float
    center_hz: float
    amplitude: float
    duration_s: float
    phase: float = 0.0


@dataclass(frozen=True)
class SynthSpec:
    duration_s: float = 10.0
    fs_hz: float = 2e6
    noise_rms: float = 0.01
    seed: int = 0
    # explicit bursts override the stochastic model below
    bursts: tuple | None = None
    n_bursts: int = 50
    band_centers_hz: tuple = (8e3, 25e3, 44e3)
    # SNR of the burst peak against the noise RMS inside the analysis band
    snr_db_range: tuple = (26.0, 46.0)
    analysis_band_hz: tuple = (2e3, 60e3)
    duration_range_s: tuple = (50e-6, 250e-6)
    shape: str = "damped"
    quiet_frac: float = 0.10
    min_separation_s: float = 2e-3
    rate_factor_after: float = 1.0
    # mechanics
    with_mechanics: bool = True
    aux_rate_hz: float = 100.0
    t_break_s: float | None = None
    stress_rate: float = 10.0
    stress_drop_per_energy: float | None = None
    stress_lag_samples: int = 2
    stress_noise: float = 0.0
    strain_rate_before: float = 1e-4
    strain_rate_factor: float = 3.0
    strain_noise: float = 0.0

    def __post_init__(self):
        if not self.fs_hz > 0 or not self.duration_s > 0:
            raise DataError("duration and sample rate must be positive")
        if self.noise_rms < 0:
            raise DataError("noise_rms must be non-negative")
        if self.shape not in ("damped", "gaussian"):
            raise DataError(f"unknown burst shape {self.shape!r}")
        centers = list(self.band_centers_hz)
        if self.bursts:
            centers += [b.center_hz for b in self.bursts]
        for c in centers:
            if not 0 < c < self.fs_hz / 2:
                raise DataError(f"burst band {c} Hz outside (0, fs/2)")

    @property
    def break_time_s(self) -> float:
        return self.t_break_s if self.t_break_s is not None else 0.56 * self.duration_s

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.bursts is not None:
            d["bursts"] = [asdict(b) for b in self.bursts]
        return d


@dataclass(frozen=True)
class TruthEvent:
    onset_index: int
    duration_samples: int
    center_hz: float
    amplitude: float
    energy: float

    @property
    def end_index(self) -> int:
        return self.onset_index + self.duration_samples


@dataclass
class SynthRecord:
    waveform: Waveform
    clean: np.ndarray
    truth: list
    stress: AuxChannel | None = None
    strain: AuxChannel | None = None
    spec: SynthSpec = field(default_factory=SynthSpec)


def inband_noise_rms(noise_rms: float, fs: float, band_hz=(2e3, 60e3)) -> float:
    """RMS of white noise after an ideal bandpass of the given edges."""
    lo, hi = band_hz
    return noise_rms * np.sqrt((hi - lo) / (fs / 2.0))


def _burst_waveform(shape, n, fs, f0, amp, phase):
    t = np.arange(n) / fs
    if shape == "damped":
        # sharp onset, decays to 1 % of peak at the end of the support
        tau = (n / fs) / np.log(100.0)
        env = np.exp(-t / tau)
        return amp * env * np.sin(2 * np.pi * f0 * t + phase)
    tc = 0.5 * (n - 1) / fs
    sigma = (n / fs) / 6.0
    env = np.exp(-0.5 * ((t - tc) / sigma) ** 2)
    return amp * env * np.sin(2 * np.pi * f0 * (t - tc) + phase)


def _draw_onsets(spec: SynthSpec, rng, n_samples: int) -> np.ndarray:
    t_lo = spec.quiet_frac * spec.duration_s
    t_hi = spec.duration_s - spec.duration_range_s[1] - 1e-3
    if t_hi <= t_lo:
        raise DataError("record too short for the configured quiet prefix")
    tb = min(max(spec.break_time_s, t_lo), t_hi)
    w_before = tb - t_lo
    w_after = (t_hi - tb) * spec.rate_factor_after
    p_before = w_before / (w_before + w_after) if (w_before + w_after) > 0 else 1.0
    chosen: list[float] = []
    attempts = 0
    while len(chosen) < spec.n_bursts:
        attempts += 1
        if attempts > 1000 * max(spec.n_bursts, 1):
            raise DataError("cannot place bursts with the requested minimum separation")
        if rng.random() < p_before:
            t = rng.uniform(t_lo, tb)
        else:
            t = rng.uniform(tb, t_hi)
        if all(abs(t - c) >= spec.min_separation_s for c in chosen):
            chosen.append(t)
    return np.sort(np.asarray(chosen))


def _stochastic_bursts(spec: SynthSpec, rng) -> list[BurstSpec]:
    n_samples = int(round(spec.duration_s * spec.fs_hz))
    onsets = _draw_onsets(spec, rng, n_samples)
    sigma_band = inband_noise_rms(spec.noise_rms, spec.fs_hz, spec.analysis_band_hz)
    out = []
    for t in onsets:
        band = float(rng.choice(np.asarray(spec.band_centers_hz, dtype=float)))
        snr_db = rng.uniform(*spec.snr_db_range)
        amp = sigma_band * 10.0 ** (snr_db / 20.0) if sigma_band > 0 else 10.0 ** (snr_db / 20.0) * 1e-3
        dur = rng.uniform(*spec.duration_range_s)
        phase = rng.uniform(0, 2 * np.pi) if spec.shape == "gaussian" else 0.0
        out.append(BurstSpec(float(t), band, float(amp), float(dur), float(phase)))
    return out


def generate(spec: SynthSpec) -> SynthRecord:
    """Build a record, its ground truth and (optionally) stress/strain channels."""
    rng = np.random.default_rng(spec.seed)
    fs = spec.fs_hz
    n = int(round(spec.duration_s * fs))
    bursts = list(spec.bursts) if spec.bursts is not None else _stochastic_bursts(spec, rng)
    clean = np.zeros(n)
    truth = []
    for b in bursts:
        i0 = int(round(b.onset_s * fs))
        m = max(2, int(round(b.duration_s * fs)))
        if i0 < 0 or i0 + m > n:
            raise DataError(f"burst at {b.onset_s} s does not fit in the record")
        shape = _burst_waveform(spec.shape, m, fs, b.center_hz, b.amplitude, b.phase)
        clean[i0 : i0 + m] += shape
        truth.append(TruthEvent(i0, m, b.center_hz, b.amplitude, float(np.dot(shape, shape))))
    truth.sort(key=lambda e: e.onset_index)
    noise = rng.normal(0.0, spec.noise_rms, n) if spec.noise_rms > 0 else np.zeros(n)
    w = Waveform(clean + noise, fs, 0.0)
    stress = strain = None
    if spec.with_mechanics:
        stress, strain = _mechanics(spec, truth, rng)
    return SynthRecord(w, clean, truth, stress, strain, spec)


def _mechanics(spec: SynthSpec, truth, rng):
    fs_aux = spec.aux_rate_hz
    t = np.arange(int(np.floor(spec.duration_s * fs_aux)) + 1) / fs_aux
    energies = np.array([e.energy for e in truth])
    c = spec.stress_drop_per_energy
    if c is None:
        # largest drop equals half a second of loading
        c = 0.5 * spec.stress_rate / energies.max() if energies.size else 0.0
    stress = spec.stress_rate * t
    lag = spec.stress_lag_samples / fs_aux
    for e in truth:
        t_end = e.end_index / spec.fs_hz + lag
        stress = stress - c * e.energy * (t >= t_end)
    if spec.stress_noise > 0:
        stress = stress + rng.normal(0.0, spec.stress_noise, t.size)
    tb = spec.break_time_s
    r1 = spec.strain_rate_before
    r2 = r1 * spec.strain_rate_factor
    strain = np.where(t < tb, r1 * t, r1 * tb + r2 * (t - tb))
    if spec.strain_noise > 0:
        strain = strain + rng.normal(0.0, spec.strain_noise, t.size)
    return AuxChannel(t, stress, "stress"), AuxChannel(t, strain, "strain")


# --------------------------------------------------------------------------
# truth matching


@dataclass(frozen=True)
class MatchResult:
    precision: float
    recall: float
    n_matched: int
    pairs: tuple
    onset_errors: np.ndarray

    @property
    def max_abs_error(self) -> float:
        return float(np.max(np.abs(self.onset_errors))) if self.onset_errors.size else 0.0

    @property
    def median_abs_error(self) -> float:
        return float(np.median(np.abs(self.onset_errors))) if self.onset_errors.size else 0.0

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "n_matched": self.n_matched,
            "median_abs_onset_error": self.median_abs_error,
            "max_abs_onset_error": self.max_abs_error,
        }


def _onset(e) -> int:
    return int(e.onset_index)


def truth_match(detected, truth, tol_samples: int) -> MatchResult:
    """One-to-one greedy matching on onset distance.

    All (detected, truth) pairs with onset distance <= ``tol_samples`` are
    taken in order of increasing distance (ties: lower truth index, then
    lower detected index) while neither side is already used.
    """
    d_on = np.array([_onset(e) for e in detected], dtype=np.int64)
    t_on = np.array([_onset(e) for e in truth], dtype=np.int64)
    pairs = []
    if d_on.size and t_on.size:
        cand = []
        for ti in range(t_on.size):
            diffs = np.abs(d_on - t_on[ti])
            for di in np.flatnonzero(diffs <= tol_samples):
                cand.append((int(diffs[di]), int(ti), int(di)))
        cand.sort()
        used_d, used_t = set(), set()
        for dist, ti, di in cand:
            if ti in used_t or di in used_d:
                continue
            used_t.add(ti)
            used_d.add(di)
            pairs.append((di, ti))
    pairs.sort(key=lambda p: p[1])
    errs = np.array([d_on[di] - t_on[ti] for di, ti in pairs], dtype=np.int64)
    n = len(pairs)
    precision = n / d_on.size if d_on.size else (1.0 if t_on.size == 0 else 0.0)
    recall = n / t_on.size if t_on.size else 1.0
    return MatchResult(float(precision), float(recall), n, tuple(pairs), errs)


# --------------------------------------------------------------------------
# truth file


def write_truth_json(record: SynthRecord, path, extra: dict | None = None) -> None:
    payload = {
        "spec": record.spec.to_dict(),
        "events": [asdict(e) for e in record.truth],
    }
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_truth_json(path) -> list[TruthEvent]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [TruthEvent(**e) for e in payload["events"]]
