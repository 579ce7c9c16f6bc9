"""Pipeline stages behind the command-line interface.

Every stage reads and writes files in one run directory. Primary outputs
carry the configuration hash (a ``# config_hash=...`` first line in CSV
files, a ``config_hash`` field in JSON files) and are listed with their
SHA-256 in ``manifest.json``. Wall-clock times go to ``run_meta.json`` only,
so rerunning a stage with the same configuration reproduces every other
file byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from pathlib import Path

import numpy as np

from . import features as feat
from . import mechanics as mech
from .config import config_hash, detection_config, synth_spec
from .detection import (
    AeEvent,
    detect_events,
    read_event_json,
    sample_non_events,
    write_event_csv,
    write_event_json,
)
from .errors import DataError
from .models import (
    accuracy,
    confusion_matrix,
    grid_search_cv,
    knn_fit,
    knn_predict,
    pca_fit,
    permutation_importance,
    save_models,
    select_k_by_bic,
    stratified_split,
    svm_train,
)
from .signal_core import (
    Segment,
    Waveform,
    load_aux_channel,
    load_waveform,
    normalize_peak,
    resample_to_length,
    rms_normalize,
    write_aux_channel,
    write_waveform,
)
from .spectral import find_band_peaks, magnitude_spectrum, zero_phase_bandpass
from .synth import generate, write_truth_json
from .wavelet import CwtBandResult, write_band_energy_csv

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RUN_META = "run_meta.json"


# --------------------------------------------------------------------------
# run directory bookkeeping


def _plain(obj):
    """Convert numpy scalars and arrays so ``json`` can write them."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Run:
    """Run directory plus the resolved configuration and its hash."""

    def __init__(self, cfg: dict, run_dir):
        self.cfg = cfg
        self.dir = Path(run_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.hash = config_hash(cfg)
        self._written: list[str] = []

    def path(self, name: str) -> Path:
        return self.dir / name

    @property
    def comment(self) -> str:
        return f"config_hash={self.hash}"

    def wrote(self, name: str) -> None:
        self._written.append(name)

    def write_json(self, name: str, payload: dict) -> Path:
        body = {"config_hash": self.hash, **_plain(payload)}
        p = self.path(name)
        p.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.wrote(name)
        return p

    def write_csv(self, name: str, header, rows) -> Path:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# {self.comment}\n")
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(header)
            for row in rows:
                wr.writerow([_cell(v) for v in row])
        self.wrote(name)
        return p

    def finish(self, stage: str, extra: dict | None = None) -> None:
        """Record this stage's outputs in the manifest and its time in the side file."""
        mpath = self.path(MANIFEST)
        manifest = json.loads(mpath.read_text(encoding="utf-8")) if mpath.exists() else {}
        manifest.setdefault("files", {})
        manifest.setdefault("stages", {})
        for name in sorted(set(self._written)):
            manifest["files"][name] = {"sha256": _sha256(self.path(name)), "stage": stage}
        manifest["stages"][stage] = {"config_hash": self.hash, **_plain(extra or {})}
        mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        meta_path = self.path(RUN_META)
        meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
        meta[stage] = {"finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
        meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self._written = []

    def manifest(self) -> dict:
        mpath = self.path(MANIFEST)
        return json.loads(mpath.read_text(encoding="utf-8")) if mpath.exists() else {}


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


# --------------------------------------------------------------------------
# inputs


def _resolve_input(run: Run, key: str, default_name: str) -> Path | None:
    given = run.cfg["input"][key]
    if given:
        p = Path(given)
        if not p.exists():
            raise DataError(f"input.{key}: file not found: {p}")
        return p
    p = run.path(default_name)
    return p if p.exists() else None


def load_record(run: Run) -> Waveform:
    """The configured waveform, or the one ``synth`` left in the run directory."""
    inp = run.cfg["input"]
    p = _resolve_input(run, "waveform", "waveform.f32")
    if p is None:
        raise DataError("no waveform: set input.waveform or run 'synth' first")
    fs = inp["sample_rate_hz"]
    synth_info = run.manifest().get("stages", {}).get("synth", {})
    if not inp["waveform"] and "sample_rate_hz" in synth_info:
        fs = synth_info["sample_rate_hz"]
    w = load_waveform(p, format=inp["format"] or None, sample_rate_hz=fs, t0_s=inp["t0_s"])
    if inp["normalize_peak"]:
        w = normalize_peak(w)
    return w


def filtered_record(run: Run, w: Waveform | None = None) -> Waveform:
    bp = run.cfg["bandpass"]
    w = load_record(run) if w is None else w
    return zero_phase_bandpass(w, bp["lo_hz"], bp["hi_hz"], bp["order"])


def load_catalog(run: Run, allow_empty: bool = False):
    p = run.path("events.json")
    if not p.exists():
        raise DataError("no event catalog: run 'detect' first")
    events, payload = read_event_json(p)
    if not events and not allow_empty:
        raise DataError("event catalog is empty")
    return events, payload


def _event_segment(w: Waveform, e: AeEvent) -> Segment:
    return w.segment(e.onset_index, min(e.end_index, len(w)))


# --------------------------------------------------------------------------
# synth


def stage_synth(run: Run) -> dict:
    spec = synth_spec(run.cfg)
    rec = generate(spec)
    write_waveform(rec.waveform, run.path("waveform.f32"), format="f32le-binary")
    run.wrote("waveform.f32")
    write_truth_json(rec, run.path("truth.json"), {"config_hash": run.hash})
    run.wrote("truth.json")
    if rec.stress is not None:
        write_aux_channel(rec.stress, run.path("stress.csv"), run.comment)
        write_aux_channel(rec.strain, run.path("strain.csv"), run.comment)
        run.wrote("stress.csv")
        run.wrote("strain.csv")
    summary = {
        "n_samples": len(rec.waveform),
        "sample_rate_hz": rec.waveform.sample_rate_hz,
        "n_bursts": len(rec.truth),
        "t_break_s": spec.break_time_s,
    }
    run.finish("synth", summary)
    return summary


# --------------------------------------------------------------------------
# detect


def stage_detect(run: Run) -> dict:
    w = load_record(run)
    dcfg = detection_config(run.cfg)
    res = detect_events(w, dcfg)
    counts = {f"{c:g}": len(v) for c, v in res.per_band.items()}
    meta = {
        "config_hash": run.hash,
        "record": {"n_samples": len(w), "sample_rate_hz": w.sample_rate_hz, "t0_s": w.t0_s},
        "thresholds": {f"{c:g}": float(t) for c, t in res.thresholds.items()},
        "band_counts": counts,
        "union_bands_hz": [float(c) for c in dcfg.bands_hz if float(c) not in {float(e) for e in dcfg.union_exclude_hz}],
        "union_count": len(res.events),
    }
    write_event_json(res.events, run.path("events.json"), **_plain(meta))
    run.wrote("events.json")
    write_event_csv(res.events, run.path("events.csv"), w.sample_rate_hz, w.t0_s, comment=run.comment)
    run.wrote("events.csv")
    for c, evs in res.per_band.items():
        name = f"events_band_{c / 1e3:g}k.csv"
        write_event_csv(evs, run.path(name), w.sample_rate_hz, w.t0_s, comment=run.comment)
        run.wrote(name)
    dec = run.cfg["detection"]["band_energy_decimate"]
    for band in res.bands:
        c = band.center_hz
        name = f"band_energy_{c / 1e3:g}k.csv"
        write_band_energy_csv(
            CwtBandResult(band, np.zeros(0), res.energies[c]),
            run.path(name),
            w.sample_rate_hz,
            w.t0_s,
            decimate=dec,
            comment=f"{run.comment} block_max={dec}",
        )
        run.wrote(name)
    summary = {"band_counts": counts, "union_count": len(res.events)}
    run.finish("detect", summary)
    return summary


# --------------------------------------------------------------------------
# features


def stage_features(run: Run) -> dict:
    events, _ = load_catalog(run)
    wf = filtered_record(run)
    ne = run.cfg["nonevents"]
    fc = run.cfg["features"]
    non = sample_non_events(wf, events, ne["ratio"] * len(events), rng_seed=ne["seed"])
    ev_segs = [_event_segment(wf, e) for e in events]
    X_ev = feat.feature_matrix(ev_segs, "classify", envelope_frac=fc["envelope_frac"])
    X_ne = feat.feature_matrix(non, "classify", envelope_frac=fc["envelope_frac"])
    X = np.vstack([X_ev, X_ne])
    labels = [1] * len(ev_segs) + [0] * len(non)
    ids = [f"e{i}" for i in range(len(ev_segs))] + [f"n{i}" for i in range(len(non))]
    feat.write_feature_table(run.path("features_classify.csv"), X, feat.FEATURE_NAMES, labels, ids, run.comment)
    run.wrote("features_classify.csv")
    Xc = feat.feature_matrix(ev_segs, "cluster", envelope_frac=fc["envelope_frac"], dwt_level=fc["dwt_level"])
    feat.write_feature_table(
        run.path("features_cluster.csv"), Xc, feat.CLUSTER_FEATURE_NAMES, [1] * len(ev_segs), ids[: len(ev_segs)], run.comment
    )
    run.wrote("features_cluster.csv")
    run.write_csv(
        "nonevents.csv",
        ["onset_index", "duration_samples"],
        [(s.start_index, len(s)) for s in non],
    )
    summary = {"n_events": len(ev_segs), "n_nonevents": len(non)}
    run.finish("features", summary)
    return summary


# --------------------------------------------------------------------------
# classification


def _class_weight(y, mode):
    if mode != "balanced":
        return None
    n = y.size
    n_pos = int(np.count_nonzero(y == 1))
    n_neg = n - n_pos
    return {1: n / (2.0 * n_pos), -1: n / (2.0 * n_neg)}


class _Knn:
    def __init__(self, X, y, k):
        self.z = feat.standardizer_fit(X)
        self.m = knn_fit(self.z.apply(X), y, min(int(k), X.shape[0]))

    def predict(self, X):
        return knn_predict(self.m, self.z.apply(X))


class _Svm:
    def __init__(self, X, y, C, gamma, tol=1e-3, class_weight="none", pca_dims=0):
        self.z = feat.standardizer_fit(X)
        Z = self.z.apply(X)
        self.pca = None
        if pca_dims:
            d = int(min(pca_dims, Z.shape[0] - 1, Z.shape[1]))
            self.pca = pca_fit(Z, d)
            Z = self.pca.transform(Z)
        ys = np.where(np.asarray(y) == 1, 1, -1)
        self.m = svm_train(Z, ys, C=C, gamma=gamma, tol=tol, class_weight=_class_weight(ys, class_weight))

    def _prep(self, X):
        Z = self.z.apply(X)
        return self.pca.transform(Z) if self.pca is not None else Z

    def predict(self, X):
        return (self.m.decision_function(self._prep(X)) > 0).astype(np.int64)


def _predict(model, X):
    return model.predict(X)


def classification_experiment(X, y, ccfg: dict, pca_dims: int = 0, importance: bool = True) -> dict:
    """Grid-searched KNN and SVM on one labelled matrix.

    Both learners are tuned by stratified k-fold cross-validation on the
    training split; the learner with the higher cross-validated accuracy is
    the selected model. Test-set metrics are reported for both.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if np.unique(y).size < 2:
        raise DataError("classification needs both events and non-events")
    tr, te = stratified_split(y, ccfg["test_frac"], ccfg["seed"])
    Xtr, ytr, Xte, yte = X[tr], y[tr], X[te], y[te]
    folds, seed = ccfg["cv_folds"], ccfg["seed"]
    n_min_fold = int(min(np.bincount(ytr))) if ytr.size else 0
    if n_min_fold < folds:
        raise DataError(f"too few samples of one class ({n_min_fold}) for {folds}-fold cross-validation")

    knn_grid = [{"k": int(k)} for k in ccfg["knn_k"]]
    best_knn, knn_scores = grid_search_cv(lambda A, b, k: _Knn(A, b, k), _predict, Xtr, ytr, knn_grid, folds, seed)
    svm_grid = [{"C": float(C), "gamma": float(g)} for C in ccfg["svm_C"] for g in ccfg["svm_gamma"]]

    def fit_svm(A, b, C, gamma):
        return _Svm(A, b, C, gamma, ccfg["svm_tol"], ccfg["class_weight"], pca_dims)

    best_svm, svm_scores = grid_search_cv(fit_svm, _predict, Xtr, ytr, svm_grid, folds, seed)
    knn = _Knn(Xtr, ytr, best_knn["k"])
    svm = fit_svm(Xtr, ytr, **best_svm)
    cm_knn = confusion_matrix(yte, knn.predict(Xte))
    cm_svm = confusion_matrix(yte, svm.predict(Xte))
    cv_knn, cv_svm = max(knn_scores), max(svm_scores)
    selected = "svm" if cv_svm >= cv_knn else "knn"
    report = {
        "n_train": int(tr.size),
        "n_test": int(te.size),
        "knn": {"best_params": best_knn, "cv_accuracy": cv_knn, "cv_scores": knn_scores, "test": cm_knn.as_dict()},
        "svm": {"best_params": best_svm, "cv_accuracy": cv_svm, "cv_scores": svm_scores, "test": cm_svm.as_dict()},
        "selected": selected,
        "selected_test": (cm_svm if selected == "svm" else cm_knn).as_dict(),
    }
    if importance:
        imp, base = permutation_importance(svm.predict, Xte, yte, ccfg["importance_repeats"], ccfg["seed"])
        report["svm_permutation_importance"] = {"baseline_accuracy": base, "importance": imp.tolist()}
    return report, {"knn": knn, "svm": svm}


def raw_waveform_matrix(segments, length: int) -> np.ndarray:
    """Rows of fixed-length, RMS-normalised snippets."""
    rows = []
    for s in segments:
        rows.append(rms_normalize(resample_to_length(s, length)).samples)
    return np.vstack(rows) if rows else np.zeros((0, length))


def stage_classify(run: Run) -> dict:
    ccfg = run.cfg["classify"]
    p = run.path("features_classify.csv")
    if not p.exists():
        raise DataError("no feature table: run 'features' first")
    X, names, labels, ids = feat.read_feature_table(p)
    if X.shape[0] == 0:
        raise DataError("feature table is empty")
    y = np.array([int(v) for v in labels], dtype=np.int64)
    report, fitted = classification_experiment(X, y, ccfg)
    report["feature_names"] = list(names)

    # raw-waveform baseline on the very same segments and split
    events, _ = load_catalog(run)
    wf = filtered_record(run)
    non = _read_nonevents(run, wf)
    segs = [_event_segment(wf, e) for e in events] + non
    R = raw_waveform_matrix(segs, ccfg["baseline_length"])
    base, _ = classification_experiment(R, y, ccfg, pca_dims=ccfg["baseline_pca_dims"], importance=False)
    report["raw_baseline"] = base

    run.write_json("classify_report.json", report)
    knn, svm = fitted["knn"], fitted["svm"]
    save_models(
        run.path("models.json"),
        {"knn_standardizer": knn.z, "knn": knn.m, "svm_standardizer": svm.z, "svm": svm.m},
        {"config_hash": run.hash, "feature_names": list(names), "labels": {"event": 1, "non_event": 0}},
    )
    run.wrote("models.json")
    imp = report["svm_permutation_importance"]["importance"]
    run.write_csv("importance.csv", ["feature", "importance"], zip(names, imp))
    summary = {
        "selected": report["selected"],
        "test_accuracy": report["selected_test"]["accuracy"],
        "test_event_recall": report["selected_test"]["recall_event"],
        "baseline_event_recall": max(base["knn"]["test"]["recall_event"], base["svm"]["test"]["recall_event"]),
    }
    run.finish("classify", summary)
    return summary


def _read_nonevents(run: Run, wf: Waveform):
    p = run.path("nonevents.csv")
    if not p.exists():
        raise DataError("no non-event list: run 'features' first")
    with open(p, encoding="utf-8") as fh:
        rows = list(csv.reader(ln for ln in fh if not ln.startswith("#")))
    return [wf.segment(int(a), int(a) + int(d)) for a, d in rows[1:]]


# --------------------------------------------------------------------------
# clustering


def cluster_experiment(Xc, kcfg: dict) -> dict:
    """Standardise, sweep K by BIC, fit the GMM and project to 2-D."""
    Xc = np.asarray(Xc, dtype=np.float64)
    n = Xc.shape[0]
    if n < 3:
        raise DataError(f"clustering needs at least 3 events, got {n}")
    z = feat.standardizer_fit(Xc, list(feat.CLUSTER_FEATURE_NAMES))
    Z = z.apply(Xc)
    pca = pca_fit(Z, min(2, n - 1, Z.shape[1]))
    P = pca.transform(Z)
    space = P if kcfg["space"] == "pca2" else Z
    k_max = min(kcfg["k_max"], n - 1)
    k_min = min(kcfg["k_min"], k_max)
    best_k, bics, models = select_k_by_bic(
        space,
        k_min,
        k_max,
        seed=kcfg["seed"],
        n_init=kcfg["n_init"],
        reg_covar=kcfg["reg_covar"],
        max_iter=kcfg["max_iter"],
        tol=kcfg["tol"],
    )
    gmm = models[best_k - k_min]
    labels = gmm.predict(space)
    # representative: the member nearest its cluster mean in standardised space
    reps = {}
    for c in range(best_k):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            continue
        centre = Z[members].mean(axis=0)
        d = np.sum((Z[members] - centre) ** 2, axis=1)
        reps[c] = int(members[int(np.argmin(d))])
    return {
        "standardizer": z,
        "pca": pca,
        "gmm": gmm,
        "labels": labels,
        "projection": P,
        "best_k": best_k,
        "k_values": list(range(k_min, k_max + 1)),
        "bics": bics,
        "representatives": reps,
    }


def stage_cluster(run: Run) -> dict:
    events, _ = load_catalog(run)
    p = run.path("features_cluster.csv")
    if not p.exists():
        raise DataError("no clustering features: run 'features' first")
    Xc, names, _, ids = feat.read_feature_table(p)
    if Xc.shape[0] != len(events):
        raise DataError("clustering features do not match the event catalog")
    res = cluster_experiment(Xc, run.cfg["cluster"])
    labels = res["labels"]
    dstress = _stress_derivative_at_events(run, events)
    energy = np.array([e.energy for e in events])
    Xf, fnames, flabels, _ = feat.read_feature_table(run.path("features_classify.csv"))
    zcr = Xf[: len(events), list(fnames).index("zcr")]

    run.write_csv("bic.csv", ["k", "bic"], zip(res["k_values"], res["bics"]))
    run.write_csv(
        "clusters.csv",
        ["event_id", "onset_index", "cluster", "pc1", "pc2"],
        [
            (ids[i], events[i].onset_index, int(labels[i]), res["projection"][i, 0],
             res["projection"][i, 1] if res["projection"].shape[1] > 1 else 0.0)
            for i in range(len(events))
        ],
    )
    table = []
    for c in range(res["best_k"]):
        m = labels == c
        if not np.any(m):
            continue
        row = {"cluster": c, "count": int(m.sum())}
        for j, name in enumerate(names):
            row[f"median_{name}"] = float(np.median(Xc[m, j]))
        row["median_zcr_per_sample"] = float(np.median(zcr[m]))
        row["median_energy"] = float(np.median(energy[m]))
        row["median_dstress_dt"] = float(np.median(dstress[m])) if dstress is not None else None
        row["representative_event"] = ids[res["representatives"][c]]
        table.append(row)
    cols = list(table[0].keys()) if table else ["cluster"]
    run.write_csv("cluster_medians.csv", cols, [[r[k] if r[k] is not None else "" for k in cols] for r in table])
    wf = filtered_record(run)
    rep_rows = []
    for c, i in sorted(res["representatives"].items()):
        seg = _event_segment(wf, events[i]).samples
        rep_rows += [(c, ids[i], k / wf.sample_rate_hz, v) for k, v in enumerate(seg)]
    run.write_csv("representatives.csv", ["cluster", "event_id", "t_rel_s", "amplitude"], rep_rows)
    if dstress is not None:
        run.write_csv(
            "cluster_dstress.csv",
            ["event_id", "cluster", "dstress_dt"],
            [(ids[i], int(labels[i]), dstress[i]) for i in range(len(events))],
        )
    report = {
        "best_k": res["best_k"],
        "k_values": res["k_values"],
        "bic": res["bics"],
        "space": run.cfg["cluster"]["space"],
        "dropped_features": list(res["standardizer"].dropped),
        "pca_explained_variance_ratio": res["pca"].explained_variance_ratio,
        "table": table,
    }
    run.write_json("cluster_report.json", report)
    save_models(
        run.path("cluster_models.json"),
        {"standardizer": res["standardizer"], "pca": res["pca"], "gmm": res["gmm"]},
        {"config_hash": run.hash, "feature_names": list(names), "space": run.cfg["cluster"]["space"]},
    )
    run.wrote("cluster_models.json")
    summary = {"best_k": res["best_k"], "sizes": [r["count"] for r in table]}
    run.finish("cluster", summary)
    return summary


def _stress_derivative_at_events(run: Run, events):
    p = _resolve_input(run, "stress", "stress.csv")
    if p is None:
        return None
    ds = mech.smoothed_derivative(load_aux_channel(p, "stress"), run.cfg["mechanics"]["derivative_window_s"])
    return mech.attach_stress_derivative(events, ds)


# --------------------------------------------------------------------------
# validation


def stage_validate(run: Run) -> dict:
    events, payload = load_catalog(run)
    mc = run.cfg["mechanics"]
    sp = _resolve_input(run, "stress", "stress.csv")
    ep = _resolve_input(run, "strain", "strain.csv")
    if sp is None or ep is None:
        raise DataError("validation needs stress and strain channels")
    stress = load_aux_channel(sp, "stress")
    strain = load_aux_channel(ep, "strain")
    rec = payload.get("record", {})
    t_start = float(rec.get("t0_s", 0.0))
    t_end = t_start + float(rec.get("n_samples", 0)) / float(rec.get("sample_rate_hz", 1.0))

    train = mech.build_impulse_train(events, stress)
    d_lag = mech.smoothed_derivative(stress, mc["lag_window_s"])
    best_lag, best_corr, lags, corrs = mech.cross_correlate(train.magnitudes, d_lag.values, mc["max_lag"])
    d_smooth = mech.smoothed_derivative(stress, mc["derivative_window_s"])
    fit = mech.two_line_fit(strain, edge_frac=mc["edge_frac"])
    ct, ce = mech.cumulative_energy(events)

    features = None
    fpath = run.path("features_classify.csv")
    if fpath.exists():
        Xf, fnames, _, _ = feat.read_feature_table(fpath)
        fnames = list(fnames)
        features = {
            "spectral_centroid_hz": Xf[: len(events), fnames.index("spectral_centroid_hz")],
            "spectral_entropy": Xf[: len(events), fnames.index("spectral_entropy")],
        }
    labels = None
    cpath = run.path("clusters.csv")
    if cpath.exists():
        with open(cpath, encoding="utf-8") as fh:
            rows = list(csv.reader(ln for ln in fh if not ln.startswith("#")))
        labels = [int(r[2]) for r in rows[1:]]
        if len(labels) != len(events):
            labels = None
    regimes = mech.regime_report(events, features, labels, fit.t_break_s, t_start, max(t_end, fit.t_break_s))

    run.write_csv(
        "impulse_vs_dstress.csv",
        ["t_s", "impulse_energy", "dstress_dt_lag", "dstress_dt_smooth"],
        zip(train.times_s, train.magnitudes, d_lag.values, d_smooth.values),
    )
    run.write_csv("xcorr.csv", ["lag_samples", "pearson"], zip(lags, corrs))
    cum_on_grid = np.zeros(strain.times_s.size)
    if ct.size:
        idx = np.searchsorted(ct, strain.times_s, side="right")
        cum_on_grid = np.where(idx > 0, ce[np.maximum(idx - 1, 0)], 0.0)
    fitted = np.where(
        np.arange(strain.times_s.size) < fit.break_index,
        fit.slopes[0] * strain.times_s + fit.intercepts[0],
        fit.slopes[1] * strain.times_s + fit.intercepts[1],
    )
    run.write_csv(
        "strain_cumenergy.csv",
        ["t_s", "strain", "two_line_fit", "cumulative_energy"],
        zip(strain.times_s, strain.values, fitted, cum_on_grid),
    )
    report = {
        "lag": {"best_lag_samples": best_lag, "correlation": best_corr, "grid": "stress channel samples"},
        "breakpoint": fit.to_dict(),
        "regimes": regimes,
        "n_events": len(events),
    }
    run.write_json("validate_report.json", report)
    summary = {"best_lag": best_lag, "correlation": best_corr, "t_break_s": fit.t_break_s}
    run.finish("validate", summary)
    return summary


# --------------------------------------------------------------------------
# report


def stage_report(run: Run, max_freq_hz: float = 100e3, bin_hz: float = 10.0) -> dict:
    """Spectrum of the filtered record plus an index of all plot-data files."""
    wf = filtered_record(run)
    spec = magnitude_spectrum(wf)
    keep = spec.freqs_hz <= max_freq_hz
    f = spec.freqs_hz[keep]
    mag = spec.magnitude[keep]
    df = f[1] - f[0] if f.size > 1 else bin_hz
    step = max(1, int(round(bin_hz / df)))
    n = f.size // step * step
    fb = f[:n].reshape(-1, step).mean(axis=1)
    mb = mag[:n].reshape(-1, step).mean(axis=1)
    run.write_csv("spectrum.csv", ["freq_hz", "magnitude"], zip(fb, mb))
    lo, hi = run.cfg["bandpass"]["lo_hz"], run.cfg["bandpass"]["hi_hz"]
    peaks = find_band_peaks(spec, fmin_hz=lo, fmax_hz=hi)
    figures = {
        "spectrum": "spectrum.csv",
        "band_energy": sorted(p.name for p in run.dir.glob("band_energy_*k.csv")),
        "impulse_vs_dstress": "impulse_vs_dstress.csv",
        "xcorr": "xcorr.csv",
        "strain_cumulative_energy": "strain_cumenergy.csv",
        "bic_curve": "bic.csv",
        "pca_scatter": "clusters.csv",
        "representative_waveforms": "representatives.csv",
        "cluster_dstress": "cluster_dstress.csv",
        "regime_tables": "validate_report.json",
    }
    present = {}
    for key, val in figures.items():
        if isinstance(val, list):
            if val:
                present[key] = val
        elif run.path(val).exists():
            present[key] = val
    run.write_json("report_index.json", {"spectral_peaks_hz": peaks, "plot_data": present})
    summary = {"spectral_peaks_hz": peaks, "n_plot_files": len(present)}
    run.finish("report", summary)
    return summary


STAGES = {
    "synth": stage_synth,
    "detect": stage_detect,
    "features": stage_features,
    "classify": stage_classify,
    "cluster": stage_cluster,
    "validate": stage_validate,
    "report": stage_report,
}
