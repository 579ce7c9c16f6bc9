"""Time the compiled kernels against the numpy fallback.

Run from the repository root after an editable install::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is fed identical inputs on both backends; the script also checks
that the two backends agree before printing timings.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from aewave import _kernels
from aewave._kernels import _pykernels


def _cases(rng):
    # runs: a 2M-sample band-energy trace with a few hundred bursts
    energy = rng.exponential(1.0, 2_000_000)
    for start in rng.integers(0, energy.size - 500, 300):
        energy[start : start + 300] += 50.0

    # SMO: two overlapping blobs, 400 points, RBF Gram matrix
    X = np.vstack([rng.normal(0, 1, (200, 12)), rng.normal(0.8, 1, (200, 12))])
    y = np.r_[np.ones(200), -np.ones(200)]
    sq = np.sum(X**2, axis=1)
    K = np.exp(-0.05 * np.maximum(sq[:, None] + sq[None, :] - 2 * X @ X.T, 0.0))

    # two-line search over a 12 000-sample strain curve
    t = np.linspace(0.0, 120.0, 12_000)
    s = np.where(t < 67.0, 1e-4 * t, 1e-4 * 67.0 + 3e-4 * (t - 67.0)) + rng.normal(0, 1e-4, t.size)
    n = t.size

    return {
        "find_runs": (lambda m: m.find_runs(energy, 20.0, 100, 200),),
        "smo_solve": (lambda m: m.smo_solve(K, y, 1.0, 1.0, 1e-3, 1_000_000),),
        "two_line_sse": (lambda m: m.two_line_sse(t, s, 600, n - 600),),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, z) for x, z in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    return a.shape == b.shape and np.allclose(a, b, rtol=1e-9, atol=1e-12)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _kernels.BACKEND != "cython":
        print("compiled backend not built; only the fallback can be timed")
    compiled = _kernels._impl if _kernels.BACKEND == "cython" else None
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<14}{'python ms':>12}{'cython ms':>12}{'speed-up':>10}  agree")
    for name, (call,) in _cases(rng).items():
        t_py = min(timeit.repeat(lambda: call(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if compiled is None:
            print(f"{name:<14}{t_py:>12.2f}{'-':>12}{'-':>10}  -")
            continue
        t_c = min(timeit.repeat(lambda: call(compiled), number=1, repeat=args.repeat)) * 1e3
        agree = _same(call(_pykernels), call(compiled))
        print(f"{name:<14}{t_py:>12.2f}{t_c:>12.2f}{t_py / t_c:>9.1f}x  {agree}")


if __name__ == "__main__":
    main()
