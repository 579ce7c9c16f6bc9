"""Hot inner loops with a compiled backend and a numpy fallback.

The Cython extension is used when it was built; otherwise, or when the
environment variable ``AEWAVE_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy versions in ``_pykernels`` are used.
"""

import os

from . import _pykernels

_force_py = os.environ.get("AEWAVE_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure-Python backend requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

find_runs = _impl.find_runs
smo_solve = _impl.smo_solve
two_line_sse = _impl.two_line_sse

__all__ = ["BACKEND", "find_runs", "smo_solve", "two_line_sse", "_pykernels"]
