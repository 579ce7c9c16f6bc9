"""Command-line entry point: ``aewave <stage> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error (missing or
malformed input, empty catalog), 4 numerical failure, 1 anything else from
the package.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import load_config, tomllib
from .errors import AeError, ConfigError

log = logging.getLogger("aewave")


def parse_set(items) -> dict:
    """Turn ``section.key=value`` strings into a nested override dict.

    Values are parsed as TOML, so ``k=6``, ``x=1e-3``, ``flag=true`` and
    ``bands=[8e3, 25e3]`` keep their types; anything that is not valid TOML
    is taken as a bare string.
    """
    out: dict = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        parts = [p.strip() for p in dotted.split(".") if p.strip()]
        if len(parts) < 2:
            raise ConfigError(f"--set key must be section.key, got {dotted!r}")
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    return out


def _deep_update(base: dict, over: dict) -> dict:
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_update(base[k], v)
        else:
            base[k] = v
    return base


def build_parser() -> argparse.ArgumentParser:
    from .pipeline import STAGES

    ap = argparse.ArgumentParser(prog="aewave", description="Acoustic-emission event detection and analysis.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="stage", required=True, metavar="STAGE")
    helps = {
        "synth": "generate a synthetic record with known events",
        "detect": "filter, compute band energies and detect events",
        "features": "extract features for events and sampled non-events",
        "classify": "train and evaluate event/non-event classifiers",
        "cluster": "cluster events with a BIC-selected Gaussian mixture",
        "validate": "compare events with the stress and strain channels",
        "report": "write the spectrum and index the plot data",
    }
    for name in STAGES:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="TOML configuration file")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one setting")
        p.add_argument("--run-dir", default="run", help="directory for all outputs (default: ./run)")
        p.add_argument("--input", help="waveform file (overrides input.waveform)")
        p.add_argument("--threads", type=int, help="worker threads for band energies (overrides run.threads)")
    return ap


def main(argv=None) -> int:
    from .pipeline import STAGES, Run

    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        overrides = parse_set(args.set)
        if args.input:
            _deep_update(overrides, {"input": {"waveform": os.fspath(args.input)}})
        if args.threads is not None:
            _deep_update(overrides, {"run": {"threads": args.threads}})
        cfg = load_config(args.config, overrides)
        run = Run(cfg, args.run_dir)
        summary = STAGES[args.stage](run)
    except AeError as exc:
        print(f"aewave {args.stage}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps({"stage": args.stage, "config_hash": run.hash, **_jsonable(summary)}, sort_keys=True))
    return 0


def _jsonable(d):
    from .pipeline import _plain

    return _plain(d)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
