"""Mechanical validation of detected events.

Event energies are placed on the stress channel's time grid and compared
with the stress derivative, the strain curve is split into two linear
regimes, and event statistics are summarised on each side of the split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DataError
from .signal_core import AuxChannel

__all__ = [
    "ImpulseTrain",
    "BreakpointFit",
    "nearest_index",
    "build_impulse_train",
    "smoothed_derivative",
    "cross_correlate",
    "cumulative_energy",
    "two_line_fit",
    "regime_report",
    "attach_stress_derivative",
]


@dataclass(frozen=True)
class ImpulseTrain:
    times_s: np.ndarray
    magnitudes: np.ndarray


@dataclass(frozen=True)
class BreakpointFit:
    """Best two-segment least-squares fit.

    ``break_index`` is the first sample of the second segment and
    ``t_break_s`` its time.
    """

    t_break_s: float
    break_index: int
    slopes: tuple
    intercepts: tuple
    sse: float
    single_line_sse: float
    single_line: tuple

    def to_dict(self) -> dict:
        return {
            "t_break_s": self.t_break_s,
            "break_index": self.break_index,
            "slope_before": self.slopes[0],
            "slope_after": self.slopes[1],
            "intercept_before": self.intercepts[0],
            "intercept_after": self.intercepts[1],
            "sse": self.sse,
            "single_line_sse": self.single_line_sse,
            "single_line_slope": self.single_line[0],
            "single_line_intercept": self.single_line[1],
        }


def nearest_index(grid, t) -> np.ndarray:
    """Index of the grid point nearest each ``t``; exact midpoints go to the earlier point."""
    grid = np.asarray(grid, dtype=np.float64)
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    hi = np.clip(np.searchsorted(grid, t, side="left"), 1, grid.size - 1)
    lo = hi - 1
    if grid.size == 1:
        return np.zeros(t.size, dtype=np.int64)
    pick_lo = (t - grid[lo]) <= (grid[hi] - t)
    return np.where(pick_lo, lo, hi).astype(np.int64)


def _end_times(events):
    return np.array([float(e.end_time_s) for e in events], dtype=np.float64)


def _energies(events):
    return np.array([float(e.energy) for e in events], dtype=np.float64)


def build_impulse_train(events, grid) -> ImpulseTrain:
    """Event energies accumulated at the grid point nearest each event end."""
    times = np.asarray(getattr(grid, "times_s", grid), dtype=np.float64)
    if times.size == 0:
        raise DataError("empty time grid")
    mags = np.zeros(times.size)
    if events:
        np.add.at(mags, nearest_index(times, _end_times(events)), _energies(events))
    return ImpulseTrain(times.copy(), mags)


def _centered_moving_average(y, half):
    """Moving mean whose window shrinks symmetrically near the ends.

    Keeping the window centred means a straight line passes through
    unchanged, so its derivative is exact everywhere.
    """
    n = y.size
    c = np.concatenate(([0.0], np.cumsum(y)))
    i = np.arange(n)
    h = np.minimum(half, np.minimum(i, n - 1 - i))
    return (c[i + h + 1] - c[i - h]) / (2 * h + 1)


def smoothed_derivative(ch: AuxChannel, window_s: float = 0.5) -> AuxChannel:
    """Central-difference derivative of a moving-average-smoothed channel.

    The window length in samples is ``window_s`` divided by the median
    sample spacing, rounded to the nearest odd integer. End points use
    one-sided differences.
    """
    t = np.asarray(ch.times_s, dtype=np.float64)
    y = np.asarray(ch.values, dtype=np.float64)
    if t.size < 3:
        raise DataError("derivative needs at least 3 samples")
    dt = float(np.median(np.diff(t)))
    width = int(np.round(window_s / dt))
    if width < 3:
        raise DataError(f"smoothing window {window_s} s spans fewer than 3 samples")
    half = width // 2
    smooth = _centered_moving_average(y, half)
    return AuxChannel(t, np.gradient(smooth, t), ch.kind)


def _pearson(a, b):
    da = a - a.mean()
    db = b - b.mean()
    den = np.sqrt(np.dot(da, da) * np.dot(db, db))
    return float(np.dot(da, db) / den) if den > 0 else 0.0


def cross_correlate(a, b, max_lag: int):
    """Pearson correlation of ``a[t]`` with ``b[t + lag]`` for each lag.

    Returns ``(best_lag, best_corr, lags, corrs)``. The best lag maximises
    ``|corr|``; ties go to the smaller ``|lag|`` and then to the negative lag.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 3:
        raise DataError("cross-correlation needs two equal-length series of at least 3 samples")
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DataError("cross-correlation of a constant series is undefined")
    n = a.size
    max_lag = int(min(max_lag, n - 2))
    lags = np.arange(-max_lag, max_lag + 1)
    corrs = np.empty(lags.size)
    for i, lag in enumerate(lags):
        if lag >= 0:
            corrs[i] = _pearson(a[: n - lag], b[lag:])
        else:
            corrs[i] = _pearson(a[-lag:], b[: n + lag])
    order = sorted(range(lags.size), key=lambda i: (-abs(corrs[i]), abs(lags[i]), lags[i]))
    best = order[0]
    return int(lags[best]), float(corrs[best]), lags, corrs


def cumulative_energy(events):
    """Step curve of released energy: ``(end_times, running_sum)`` in time order."""
    if not events:
        return np.zeros(0), np.zeros(0)
    t = _end_times(events)
    order = np.argsort(t, kind="stable")
    return t[order], np.cumsum(_energies(events)[order])


def _line(t, y):
    A = np.column_stack([t, np.ones_like(t)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - (slope * t + icpt)
    return float(slope), float(icpt), float(np.dot(r, r))


def two_line_fit(ch, edge_frac: float = 0.05, tie_rtol: float = 1e-10) -> BreakpointFit:
    """Exhaustive search for the split minimising the two-line SSE.

    Candidate first indices of the right segment run over the interior,
    excluding ``edge_frac`` of the samples at each end (and always keeping
    two points per side). Lines are fitted independently. Candidates whose
    SSE is within ``tie_rtol`` times the total sum of squares of the best
    one are treated as tied, and the median of them (lower median for an
    even count) is returned.
    """
    t, y = (ch.times_s, ch.values) if isinstance(ch, AuxChannel) else ch
    t = np.ascontiguousarray(t, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = t.size
    if n < 6 or y.size != n:
        raise DataError("two-line fit needs at least 6 points")
    skip = int(np.ceil(edge_frac * n))
    lo = max(2, skip)
    hi = min(n - 2, n - skip)
    if hi < lo:
        lo, hi = 2, n - 2
    sse = np.asarray(_kernels.two_line_sse(t, y, lo, hi))
    sst = float(np.sum((y - y.mean()) ** 2))
    best = float(sse.min())
    tied = np.flatnonzero(sse <= best + tie_rtol * max(sst, np.finfo(float).tiny))
    b = lo + int(tied[(tied.size - 1) // 2])
    s1, c1, e1 = _line(t[:b], y[:b])
    s2, c2, e2 = _line(t[b:], y[b:])
    s0, c0, e0 = _line(t, y)
    return BreakpointFit(float(t[b]), b, (s1, s2), (c1, c2), e1 + e2, e0, (s0, c0))


def _median_or_none(v):
    v = np.asarray(v, dtype=np.float64)
    return float(np.median(v)) if v.size else None


def regime_report(events, features, cluster_labels, t_break: float, t_start: float, t_end: float) -> dict:
    """Event statistics before and after ``t_break``.

    Parameters
    ----------
    events : sequence of AeEvent
        Side membership uses each event's end time; ``t < t_break`` is before.
    features : mapping or None
        Per-event arrays ``spectral_centroid_hz`` and ``spectral_entropy``.
    cluster_labels : sequence of int or None
    t_break, t_start, t_end : float
        Split time and the record span used for rates.
    """
    if not t_start <= t_break <= t_end:
        raise DataError("break time outside the record span")
    n = len(events)
    times = _end_times(events) if n else np.zeros(0)
    energy = _energies(events) if n else np.zeros(0)
    feats = features or {}
    cent = np.asarray(feats.get("spectral_centroid_hz", np.full(n, np.nan)), dtype=np.float64)
    ent = np.asarray(feats.get("spectral_entropy", np.full(n, np.nan)), dtype=np.float64)
    labels = None if cluster_labels is None else np.asarray(cluster_labels, dtype=np.int64)
    if cent.size != n or ent.size != n or (labels is not None and labels.size != n):
        raise DataError("features and cluster labels must have one entry per event")
    all_clusters = sorted(set(labels.tolist())) if labels is not None else []
    before = times < t_break
    sides = {}
    for name, mask, span in (
        ("before", before, t_break - t_start),
        ("after", ~before, t_end - t_break),
    ):
        k = int(np.count_nonzero(mask))
        side = {
            "count": k,
            "duration_s": float(span),
            "event_rate_per_s": k / span if span > 0 else None,
            "energy_rate_per_s": float(energy[mask].sum()) / span if span > 0 else None,
            "median_spectral_centroid_hz": _median_or_none(cent[mask][np.isfinite(cent[mask])]),
            "median_spectral_entropy": _median_or_none(ent[mask][np.isfinite(ent[mask])]),
        }
        if labels is not None:
            counts = {int(c): int(np.count_nonzero(labels[mask] == c)) for c in all_clusters}
            side["cluster_counts"] = counts
            side["cluster_fractions"] = {c: (v / k if k else 0.0) for c, v in counts.items()}
        sides[name] = side
    return {"t_break_s": float(t_break), "total": n, **sides}


def attach_stress_derivative(events, dstress: AuxChannel) -> np.ndarray:
    """Value of ``dstress`` at the sample nearest each event's end time."""
    if not events:
        return np.zeros(0)
    idx = nearest_index(dstress.times_s, _end_times(events))
    return np.asarray(dstress.values, dtype=np.float64)[idx]
