# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled first-order linear recurrences."""
import numpy as np
cimport numpy as cnp


def forward_scan(double[::1] a, double[::1] b, double x0):
    """x[0] = x0, x[i+1] = a[i] * x[i] + b[i]."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i
    out = np.empty(n + 1)
    cdef double[::1] x = out
    x[0] = x0
    for i in range(n):
        x[i + 1] = a[i] * x[i] + b[i]
    return out


def backward_scan(double[::1] a, double[::1] b, double xn):
    """x[n] = xn, x[i] = a[i] * x[i+1] + b[i]."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i
    out = np.empty(n + 1)
    cdef double[::1] x = out
    x[n] = xn
    for i in range(n - 1, -1, -1):
        x[i] = a[i] * x[i + 1] + b[i]
    return out


def logistic_orbit(double lam, double c, double x0, Py_ssize_t n_fwd):
    """Forward orbit of x -> lam*x - c*x**2."""
    out = np.empty(n_fwd + 1)
    cdef double[::1] x = out
    cdef Py_ssize_t i
    x[0] = x0
    for i in range(n_fwd):
        x[i + 1] = lam * x[i] - c * x[i] * x[i]
    return out
