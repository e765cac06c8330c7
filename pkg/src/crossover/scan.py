"""Recurrence kernels; compiled when the extension is built, else pure Python.

Set ``CROSSOVER_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _scan_py

try:
    if os.environ.get("CROSSOVER_PURE_PYTHON"):
        raise ImportError
    from . import _scan as _impl

    BACKEND = "cython"
except ImportError:  # extension not built
    _impl = _scan_py
    BACKEND = "python"


def _f64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def forward_scan(a, b, x0):
    return _impl.forward_scan(_f64(a), _f64(b), float(x0))


def backward_scan(a, b, xn):
    return _impl.backward_scan(_f64(a), _f64(b), float(xn))


def logistic_orbit(lam, c, x0, n_fwd):
    return _impl.logistic_orbit(float(lam), float(c), float(x0), int(n_fwd))
