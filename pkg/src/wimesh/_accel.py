"""Numba switch for the hot kernels.

Set ``WIMESH_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python over numpy arrays. Both paths execute the same function bodies, so
results are bit-identical; only speed differs.
"""
from __future__ import annotations

import os
from typing import Callable

DISABLED = os.environ.get("WIMESH_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

NUMBA_AVAILABLE = False
if not DISABLED:
    try:
        import numba as _numba

        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _numba = None


def njit(*dargs, **dkwargs):
    """``numba.njit`` when enabled, identity decorator otherwise."""
    if NUMBA_AVAILABLE:
        return _numba.njit(*dargs, **dkwargs)

    def _wrap(func: Callable) -> Callable:
        return func

    if len(dargs) == 1 and callable(dargs[0]) and not dkwargs:
        return dargs[0]
    return _wrap


def backend() -> str:
    return "numba" if NUMBA_AVAILABLE else "python"
