"""Kernel backend selected at import: compiled extension if built, else numpy.

Set ``LOCKBENCH_PURE_PYTHON=1`` to force the numpy fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("LOCKBENCH_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

erm_error_counts = _impl.erm_error_counts
sgd_sequential = _impl.sgd_sequential
adamw_update = _impl.adamw_update


def backends() -> dict:
    """Every importable backend by name (used by tests and the benchmark)."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
