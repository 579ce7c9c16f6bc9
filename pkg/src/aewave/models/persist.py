"""Versioned JSON files for fitted models and their preprocessing."""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import DataError
from ..features import Standardizer
from .gmm import GmmModel
from .knn import KnnModel
from .pca import PcaModel
from .svm import SvmModel

FORMAT_VERSION = 1

_KINDS = {
    "knn": KnnModel,
    "svm": SvmModel,
    "pca": PcaModel,
    "gmm": GmmModel,
    "standardizer": Standardizer,
}


def _kind_of(obj) -> str:
    for name, cls in _KINDS.items():
        if isinstance(obj, cls):
            return name
    raise DataError(f"cannot serialise {type(obj).__name__}")


def model_bundle(parts: dict, meta: dict | None = None) -> dict:
    """Dictionary form of named model parts, e.g. ``{"standardizer": z, "svm": m}``."""
    return {
        "format_version": FORMAT_VERSION,
        "meta": dict(meta or {}),
        "parts": {name: {"kind": _kind_of(obj), "params": obj.to_dict()} for name, obj in parts.items()},
    }


def dumps_bundle(parts: dict, meta: dict | None = None) -> str:
    # floats are written with repr, the shortest decimal that reads back to
    # the identical double
    return json.dumps(model_bundle(parts, meta), indent=1, sort_keys=True) + "\n"


def save_models(path, parts: dict, meta: dict | None = None) -> None:
    Path(path).write_text(dumps_bundle(parts, meta), encoding="utf-8")


def load_models(path):
    """Returns ``(parts, meta)``."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format_version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format {payload.get('format_version')!r}")
    parts = {}
    for name, entry in payload["parts"].items():
        cls = _KINDS.get(entry["kind"])
        if cls is None:
            raise DataError(f"{path}: unknown model kind {entry['kind']!r}")
        parts[name] = cls.from_dict(entry["params"])
    return parts, payload.get("meta", {})
