"""Pipeline configuration: TOML sections with every default pre-filled.

A configuration is a plain nested ``dict``. :func:`load_config` overlays a
user file on :data:`DEFAULTS`, rejects unknown keys and type mismatches, and
:func:`config_hash` fingerprints the resolved result for provenance.
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from .detection import STATISTICS, DetectionConfig, ThresholdSpec
from .errors import ConfigError
from .synth import SynthSpec

__all__ = ["DEFAULTS", "load_config", "resolve_config", "config_hash", "detection_config", "synth_spec"]

DEFAULTS: dict = {
    "input": {
        "waveform": "",
        "format": "",
        "sample_rate_hz": 2e6,
        "t0_s": 0.0,
        "stress": "",
        "strain": "",
        "normalize_peak": False,
    },
    "bandpass": {"lo_hz": 2e3, "hi_hz": 60e3, "order": 4},
    "bands": {
        "centers_hz": [8e3, 16e3, 25e3, 44e3],
        "frac_halfwidth": 0.20,
        "n_scales": 8,
        "morlet_w0": 6.0,
        "exclude_from_union_hz": [16e3],
    },
    "threshold": {
        "quiet_start_s": -1.0,
        "quiet_end_s": -1.0,
        "quiet_frac": 0.05,
        "multiplier_k": 6.0,
        "statistic": "amplitude:mean+k*std",
        "quantile": 0.99,
        "band_multipliers": {},
    },
    "detection": {
        "min_duration": 100,
        "merge_gap": 200,
        "onset_refine": "aic",
        "refine_lookback": 400,
        "chunk_size": 2**20,
        "overlap": 2**16,
        "band_energy_decimate": 1000,
    },
    "nonevents": {"ratio": 10, "seed": 0},
    "features": {"envelope_frac": 0.10, "dwt_level": 3},
    "classify": {
        "test_frac": 0.2,
        "seed": 0,
        "cv_folds": 5,
        "knn_k": list(range(1, 26)),
        "svm_C": [0.1, 1.0, 10.0],
        "svm_gamma": [0.001, 0.01, 0.1],
        "svm_tol": 1e-3,
        "class_weight": "none",
        "importance_repeats": 10,
        "baseline_length": 1024,
        "baseline_pca_dims": 50,
    },
    "cluster": {
        "k_min": 2,
        "k_max": 6,
        "seed": 0,
        "n_init": 10,
        "reg_covar": 1e-6,
        "max_iter": 500,
        "tol": 1e-6,
        "space": "standardized",
    },
    "mechanics": {
        "derivative_window_s": 0.5,
        "lag_window_s": 0.03,
        "max_lag": 20,
        "edge_frac": 0.05,
    },
    "synth": {
        "duration_s": 10.0,
        "fs_hz": 2e6,
        "noise_rms": 0.01,
        "seed": 0,
        "n_bursts": 50,
        "band_centers_hz": [8e3, 25e3, 44e3],
        "snr_db_range": [26.0, 46.0],
        "duration_range_s": [50e-6, 250e-6],
        "shape": "damped",
        "quiet_frac": 0.10,
        "min_separation_s": 2e-3,
        "rate_factor_after": 1.0,
        "with_mechanics": True,
        "aux_rate_hz": 100.0,
        "t_break_s": -1.0,
        "stress_rate": 10.0,
        "stress_lag_samples": 2,
        "stress_noise": 0.0,
        "strain_rate_before": 1e-4,
        "strain_rate_factor": 3.0,
        "strain_noise": 0.0,
    },
    "run": {"threads": 1},
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key {where!r}")
        ref = base[key]
        if isinstance(ref, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where!r} must be a table")
            # free-form tables (per-band overrides) accept any key
            out[key] = dict(val) if not ref and key == "band_multipliers" else _merge(ref, val, where)
            continue
        out[key] = _coerce(ref, val, where)
    return out


def _coerce(ref, val, where):
    if isinstance(ref, bool):
        if not isinstance(val, bool):
            raise ConfigError(f"{where!r} must be true or false")
        return val
    if isinstance(ref, float):
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{where!r} must be a number")
        return float(val)
    if isinstance(ref, int):
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{where!r} must be an integer")
        return val
    if isinstance(ref, str):
        if not isinstance(val, str):
            raise ConfigError(f"{where!r} must be a string")
        return val
    if isinstance(ref, list):
        if not isinstance(val, list):
            raise ConfigError(f"{where!r} must be an array")
        if ref and isinstance(ref[0], (int, float)) and not isinstance(ref[0], bool):
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val):
                raise ConfigError(f"{where!r} must be an array of numbers")
            return [type(ref[0])(v) if isinstance(ref[0], float) else v for v in val]
        return list(val)
    return val


def resolve_config(overrides: dict | None = None) -> dict:
    cfg = _merge(DEFAULTS, overrides or {})
    _validate(cfg)
    return cfg


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Read a TOML file (optional) and apply ``overrides`` on top."""
    user: dict = {}
    if path:
        p = Path(path)
        try:
            user = tomllib.loads(p.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {p}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{p}: {exc}") from exc
    cfg = _merge(DEFAULTS, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    bp = cfg["bandpass"]
    if not 0 < bp["lo_hz"] < bp["hi_hz"]:
        raise ConfigError("bandpass edges must satisfy 0 < lo_hz < hi_hz")
    b = cfg["bands"]
    if not b["centers_hz"]:
        raise ConfigError("at least one detection band is required")
    if not 0 < b["frac_halfwidth"] < 1:
        raise ConfigError("bands.frac_halfwidth must lie in (0, 1)")
    if cfg["threshold"]["statistic"] not in STATISTICS:
        raise ConfigError(f"threshold.statistic must be one of {sorted(STATISTICS)}")
    if cfg["threshold"]["multiplier_k"] <= 0:
        raise ConfigError("threshold.multiplier_k must be positive")
    for key, k in cfg["threshold"]["band_multipliers"].items():
        if not isinstance(k, (int, float)) or k <= 0:
            raise ConfigError(f"threshold.band_multipliers[{key!r}] must be a positive number")
    d = cfg["detection"]
    if d["min_duration"] < 1 or d["merge_gap"] < 0:
        raise ConfigError("detection.min_duration must be >= 1 and merge_gap >= 0")
    if d["onset_refine"] not in ("aic", "none"):
        raise ConfigError("detection.onset_refine must be 'aic' or 'none'")
    c = cfg["classify"]
    if not 0 < c["test_frac"] < 1:
        raise ConfigError("classify.test_frac must lie in (0, 1)")
    if c["class_weight"] not in ("none", "balanced"):
        raise ConfigError("classify.class_weight must be 'none' or 'balanced'")
    k = cfg["cluster"]
    if not 1 <= k["k_min"] <= k["k_max"]:
        raise ConfigError("cluster K range is invalid")
    if k["space"] not in ("standardized", "pca2"):
        raise ConfigError("cluster.space must be 'standardized' or 'pca2'")
    if cfg["run"]["threads"] < 1:
        raise ConfigError("run.threads must be >= 1")


def config_hash(cfg: dict) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON form."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def detection_config(cfg: dict) -> DetectionConfig:
    t = cfg["threshold"]
    quiet = None
    if t["quiet_start_s"] >= 0 and t["quiet_end_s"] > t["quiet_start_s"]:
        quiet = (t["quiet_start_s"], t["quiet_end_s"])
    spec = ThresholdSpec(quiet, t["quiet_frac"], t["multiplier_k"], t["statistic"], t["quantile"])
    d = cfg["detection"]
    b = cfg["bands"]
    return DetectionConfig(
        bandpass_hz=(cfg["bandpass"]["lo_hz"], cfg["bandpass"]["hi_hz"]),
        filter_order=cfg["bandpass"]["order"],
        bands_hz=tuple(b["centers_hz"]),
        frac_halfwidth=b["frac_halfwidth"],
        n_scales=b["n_scales"],
        w0=b["morlet_w0"],
        union_exclude_hz=tuple(b["exclude_from_union_hz"]),
        threshold=spec,
        band_multipliers={float(k): float(v) for k, v in t["band_multipliers"].items()},
        min_duration=d["min_duration"],
        merge_gap=d["merge_gap"],
        onset_refine=d["onset_refine"],
        refine_lookback=d["refine_lookback"],
        chunk_size=d["chunk_size"],
        overlap=d["overlap"],
        threads=cfg["run"]["threads"],
    )


def synth_spec(cfg: dict) -> SynthSpec:
    s = dict(cfg["synth"])
    tb = s.pop("t_break_s")
    return SynthSpec(
        duration_s=s["duration_s"],
        fs_hz=s["fs_hz"],
        noise_rms=s["noise_rms"],
        seed=s["seed"],
        n_bursts=s["n_bursts"],
        band_centers_hz=tuple(s["band_centers_hz"]),
        snr_db_range=tuple(s["snr_db_range"]),
        duration_range_s=tuple(s["duration_range_s"]),
        shape=s["shape"],
        quiet_frac=s["quiet_frac"],
        min_separation_s=s["min_separation_s"],
        rate_factor_after=s["rate_factor_after"],
        with_mechanics=s["with_mechanics"],
        aux_rate_hz=s["aux_rate_hz"],
        t_break_s=None if tb < 0 else tb,
        stress_rate=s["stress_rate"],
        stress_lag_samples=s["stress_lag_samples"],
        stress_noise=s["stress_noise"],
        strain_rate_before=s["strain_rate_before"],
        strain_rate_factor=s["strain_rate_factor"],
        strain_noise=s["strain_noise"],
    )
