"""Waveform containers, file ingestion and amplitude/length normalisation."""

from __future__ import annotations

import re
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, DegenerateSignal, EmptyInput, NonFiniteSample

__all__ = [
    "Waveform",
    "Segment",
    "AuxChannel",
    "load_waveform",
    "write_waveform",
    "load_aux_channel",
    "write_aux_channel",
    "normalize_peak",
    "resample_to_length",
    "rms_normalize",
]

_HEADER_RE = re.compile(r"(\w+)\s*=\s*([^\s,]+)")


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


def _check_finite(arr: np.ndarray) -> None:
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        i = int(bad[0])
        raise NonFiniteSample(i, float(arr[i]))


@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled real signal.

    ``samples`` is stored as a read-only float64 array; ``t0_s`` is the time of
    the first sample in seconds.
    """

    samples: np.ndarray
    sample_rate_hz: float
    t0_s: float = 0.0

    def __post_init__(self):
        arr = _frozen_array(self.samples)
        if arr.size == 0:
            raise EmptyInput("waveform has no samples")
        if not self.sample_rate_hz > 0:
            raise DataError(f"sample rate must be positive, got {self.sample_rate_hz}")
        _check_finite(arr)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "t0_s", float(self.t0_s))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    @property
    def times(self) -> np.ndarray:
        return self.t0_s + np.arange(self.samples.size) / self.sample_rate_hz

    def with_samples(self, samples) -> "Waveform":
        return Waveform(samples, self.sample_rate_hz, self.t0_s)

    def segment(self, start: int, stop: int) -> "Segment":
        if not 0 <= start < stop <= len(self):
            raise DataError(f"segment [{start}, {stop}) outside waveform of length {len(self)}")
        return Segment(self.samples[start:stop], self.sample_rate_hz, start)


@dataclass(frozen=True)
class Segment:
    """A snippet of a parent waveform starting at ``start_index``."""

    samples: np.ndarray
    sample_rate_hz: float
    start_index: int = 0

    def __post_init__(self):
        arr = _frozen_array(self.samples)
        if arr.size == 0:
            raise EmptyInput("segment has no samples")
        if not self.sample_rate_hz > 0:
            raise DataError(f"sample rate must be positive, got {self.sample_rate_hz}")
        if self.start_index < 0:
            raise DataError("start_index must be non-negative")
        _check_finite(arr)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "start_index", int(self.start_index))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def with_samples(self, samples) -> "Segment":
        return Segment(samples, self.sample_rate_hz, self.start_index)


@dataclass(frozen=True)
class AuxChannel:
    """Irregularly sampled mechanical channel (stress or strain)."""

    times_s: np.ndarray
    values: np.ndarray
    kind: str = "stress"

    def __post_init__(self):
        t = _frozen_array(self.times_s)
        v = _frozen_array(self.values)
        if t.size != v.size:
            raise DataError(f"times ({t.size}) and values ({v.size}) differ in length")
        if t.size == 0:
            raise EmptyInput("aux channel is empty")
        if self.kind not in ("stress", "strain"):
            raise DataError(f"unknown aux channel kind {self.kind!r}")
        _check_finite(t)
        _check_finite(v)
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise DataError("aux channel times must be strictly increasing")
        object.__setattr__(self, "times_s", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times_s.size


# --------------------------------------------------------------------------
# ingestion


def _parse_csv_header(line: str) -> dict:
    return {k: float(v) for k, v in _HEADER_RE.findall(line.lstrip("#"))}


def _load_csv(path: Path):
    meta = {}
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                try:
                    meta.update(_parse_csv_header(line))
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno + 1}: malformed header {line!r}") from exc
                continue
            try:
                values.append(float(line.split(",")[0]))
            except ValueError as exc:
                if not values and not meta:
                    # tolerate a single textual column header
                    continue
                raise DataError(f"{path}:{lineno + 1}: cannot parse {line!r}") from exc
    return np.asarray(values, dtype=np.float64), meta


def _load_wav(path: Path):
    with wave.open(str(path), "rb") as wf:
        n_channels = wf.getnchannels()
        width = wf.getsampwidth()
        fs = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    if n_channels != 1:
        raise DataError(f"{path}: expected mono WAV, found {n_channels} channels")
    if width == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif width == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        ints = np.where(ints & 0x800000, ints - (1 << 24), ints)
        data = ints.astype(np.float64) / float(1 << 23)
    else:
        raise DataError(f"{path}: unsupported WAV sample width {8 * width} bits")
    return data, {"fs_hz": float(fs)}


def _guess_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix in (".csv", ".txt"):
        return "csv"
    if suffix == ".wav":
        return "wav-pcm"
    if suffix in (".f32", ".bin", ".raw"):
        return "f32le-binary"
    raise DataError(f"cannot infer waveform format from {path.name!r}")


def load_waveform(path, format=None, sample_rate_hz=None, t0_s=None) -> Waveform:
    """Read a waveform from ``csv``, ``f32le-binary`` or ``wav-pcm``.

    The sample rate comes from the file header (CSV ``# fs_hz=...`` line or
    the WAV header) or from ``sample_rate_hz``; an explicit argument wins.
    """
    path = Path(path)
    fmt = format or _guess_format(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    if fmt == "csv":
        data, meta = _load_csv(path)
    elif fmt == "f32le-binary":
        data = np.fromfile(path, dtype="<f4").astype(np.float64)
        meta = {}
    elif fmt == "wav-pcm":
        data, meta = _load_wav(path)
    else:
        raise DataError(f"unknown waveform format {fmt!r}")
    if data.size == 0:
        raise EmptyInput(f"{path}: no samples")
    fs = sample_rate_hz if sample_rate_hz is not None else meta.get("fs_hz")
    if fs is None:
        raise DataError(f"{path}: sample rate not given in header or config")
    t0 = t0_s if t0_s is not None else meta.get("t0_s", 0.0)
    return Waveform(data, fs, t0)


def write_waveform(w: Waveform, path, format=None) -> None:
    path = Path(path)
    fmt = format or _guess_format(path)
    if fmt == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# fs_hz={float(w.sample_rate_hz)!r} t0_s={float(w.t0_s)!r}\n")
            for v in w.samples:
                fh.write(f"{float(v)!r}\n")
    elif fmt == "f32le-binary":
        w.samples.astype("<f4").tofile(path)
    elif fmt == "wav-pcm":
        ints = np.clip(np.round(w.samples * 32767.0), -32768, 32767).astype("<i2")
        with wave.open(str(path), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(int(round(w.sample_rate_hz)))
            wf.writeframes(ints.tobytes())
    else:
        raise DataError(f"unknown waveform format {fmt!r}")


def load_aux_channel(path, kind: str) -> AuxChannel:
    """Read ``time_s,value`` rows; ``#`` comments and a text header are skipped."""
    times, values = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                t, v = float(parts[0]), float(parts[1])
            except (ValueError, IndexError) as exc:
                if not times:
                    continue
                raise DataError(f"{path}:{lineno + 1}: cannot parse {line!r}") from exc
            times.append(t)
            values.append(v)
    if not times:
        raise EmptyInput(f"{path}: no rows")
    return AuxChannel(np.array(times), np.array(values), kind)


def write_aux_channel(ch: AuxChannel, path, header_comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write("time_s,value\n")
        for t, v in zip(ch.times_s, ch.values):
            fh.write(f"{float(t)!r},{float(v)!r}\n")


# --------------------------------------------------------------------------
# normalisation


def normalize_peak(w):
    """Scale so that the largest absolute sample is exactly 1."""
    peak = np.max(np.abs(w.samples))
    if peak == 0:
        raise DegenerateSignal("cannot peak-normalise an all-zero signal")
    return w.with_samples(w.samples / peak)


def rms_normalize(s):
    x = s.samples
    peak = np.max(np.abs(x))
    if peak == 0:
        raise DegenerateSignal("cannot RMS-normalise a zero-RMS signal")
    # scale by the peak first so tiny inputs do not underflow when squared
    u = x / peak
    return s.with_samples(u / np.sqrt(np.mean(u * u)))


def resample_to_length(s: Segment, n: int) -> Segment:
    """Linearly interpolate ``s`` onto ``n`` equally spaced points.

    The first and last samples map onto the first and last output samples.
    The output keeps the parent's sample rate field; callers that care about
    physical time should use the original segment.
    """
    m = len(s)
    if n < 2:
        raise DataError(f"target length must be >= 2, got {n}")
    if m < 2:
        raise DataError("cannot resample a segment shorter than 2 samples")
    if n == m:
        return s
    pos = np.linspace(0.0, m - 1, n)
    return s.with_samples(np.interp(pos, np.arange(m, dtype=np.float64), s.samples))
