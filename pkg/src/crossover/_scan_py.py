"""Pure-Python versions of the recurrences in ``_scan.pyx``."""
import numpy as np


def forward_scan(a, b, x0):
    """x[0] = x0, x[i+1] = a[i] * x[i] + b[i]."""
    n = len(a)
    x = np.empty(n + 1)
    x[0] = x0
    acc = float(x0)
    for i in range(n):
        acc = a[i] * acc + b[i]
        x[i + 1] = acc
    return x


def backward_scan(a, b, xn):
    """x[n] = xn, x[i] = a[i] * x[i+1] + b[i]."""
    n = len(a)
    x = np.empty(n + 1)
    x[n] = xn
    acc = float(xn)
    for i in range(n - 1, -1, -1):
        acc = a[i] * acc + b[i]
        x[i] = acc
    return x


def logistic_orbit(lam, c, x0, n_fwd):
    """Forward orbit of x -> lam*x - c*x**2."""
    x = np.empty(n_fwd + 1)
    x[0] = x0
    acc = float(x0)
    for i in range(n_fwd):
        acc = lam * acc - c * acc * acc
        x[i + 1] = acc
    return x
