"""Weighted orbit sums, their closed-form majorants and small-eps constants.

Four sums control the discrete integral equations:

``dg_forward``   sup_{n<0}  gbar_n^-g  sum_{n<=p<0} gbar_p^nu prod_{n<=j<=p} 1/f'(gbar_j)
``dg_backward``  sup_{n>0}  gbar_n^-g  sum_{0<=p<n} gbar_p^nu prod_{p<j<n} f'(gbar_j)
``mu_forward``   sup_n      gbar_n^-g  sum_{p>=n} L^(-(3+eps)/2 (p-n+1)) gbar_p^nu
``R_backward``   sup_n      gbar_n^-g  sum_{p<n} c_R^(n-p-1) gbar_p^nu

Inside the stored window each sum is evaluated through a first-order linear
recurrence for ``S_n = gbar_n^g * Delta_n``; everything outside the window is
covered by an explicit geometric majorant, reported as ``tail``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import scan
from .errors import PreconditionError, TruncationError, UsageError
from .flow import FlowParams, GbarSequence, f_inverse

__all__ = ["SIGMA_KINDS", "SigmaSpec", "sigma_value", "bar_sigma", "k_constant", "upsilon"]

SIGMA_KINDS = ("dg_forward", "dg_backward", "mu_forward", "R_backward")


@dataclass(frozen=True)
class SigmaSpec:
    which: str
    gamma: float
    nu: float
    c_R: float = 0.5

    def __post_init__(self):
        if self.which not in SIGMA_KINDS:
            raise UsageError(f"unknown sum kind {self.which!r}; expected one of {SIGMA_KINDS}")
        if self.gamma < 0 or self.nu < 0:
            raise PreconditionError("exponents must be nonnegative")
        if not (0.0 < self.c_R < 1.0):
            raise PreconditionError("c_R must lie in (0, 1)")

    def hypotheses(self, fp: FlowParams, omega0: float) -> dict:
        """Hypothesis flags of the majorant for this kind."""
        g, nu, eps = self.gamma, self.nu, fp.eps
        if self.which == "R_backward":
            return {"nu >= gamma >= 0": nu >= g >= 0}
        if self.which == "mu_forward":
            return {"nu >= gamma >= 0": nu >= g >= 0, "eps*nu < (3+eps)/2": eps * nu < (3.0 + eps) / 2.0}
        if self.which == "dg_backward":
            return {"gamma, nu >= 0": True}
        ups = upsilon(fp, omega0, nu) if nu > 0 else math.inf
        return {"0 <= gamma <= 1": 0.0 <= g <= 1.0, "nu > 0": nu > 0, "0 < Upsilon < 1": 0.0 < ups < 1.0}


def upsilon(fp: FlowParams, omega0: float, nu: float) -> float:
    Le = fp.Le
    return 2.0 * Le ** (1.0 / nu) / (Le + math.sqrt(Le * Le - 4.0 * omega0 * (Le - 1.0)))


def _require(spec: SigmaSpec, fp: FlowParams, omega0: float):
    failed = [k for k, ok in spec.hypotheses(fp, omega0).items() if not ok]
    if failed:
        raise PreconditionError(
            f"majorant for {spec.which} needs {', '.join(failed)}",
            diagnostics={"which": spec.which, "gamma": spec.gamma, "nu": spec.nu, "failed": failed},
        )


def _geom(r: float) -> float:
    return math.inf if r >= 1.0 else 1.0 / (1.0 - r)


def _tail(value: float, bound: float) -> float:
    """A float ``t >= 0`` with ``value + t >= bound`` in floating point."""
    if not math.isfinite(bound):
        return math.inf
    t = max(bound - value, 0.0)
    while value + t < bound:
        t += math.ulp(bound)
    return t


def sigma_value(spec: SigmaSpec, gs: GbarSequence, fp: FlowParams | None = None):
    """Window supremum of the chosen sum and a rigorous bound on what it misses.

    Returns
    -------
    value : float
        Maximum of the defining expression over the stored window.
    tail : float
        Nonnegative number such that the true supremum over all integers is
        at most ``value + tail``.
    """
    fp = gs.fp if fp is None else fp
    g, nu = spec.gamma, spec.nu
    vals = gs.values
    ns = gs.ns
    N_minus, N_plus = gs.n_minus, gs.n_plus
    gstar, Le, c = fp.gbar_star, fp.Le, fp.c
    gnu = vals**nu
    fprime = Le - 2.0 * c * vals

    if spec.which == "dg_backward":
        # S_{n+1} = f'_n S_n + gbar_n^nu from S_0 = 0, n >= 0
        if N_plus < 1:
            raise TruncationError("dg_backward needs n_plus >= 1")
        i0 = N_minus
        S = scan.forward_scan(fprime[i0:-1], gnu[i0:-1], 0.0)
        delta = S[1:] / vals[i0 + 1 :] ** g
        value = float(delta.max())
        q = float(fprime[-1])
        out_right = max(float(S[-1]), gstar**nu * _geom(q)) / vals[-1] ** g
        tail = _tail(value, out_right)
    elif spec.which == "dg_forward":
        # S_n = (gbar_n^nu + S_{n+1}) / f'_n from S_0 = 0, n < 0
        if N_minus < 1:
            raise TruncationError("dg_forward needs n_minus >= 1")
        inv = 1.0 / fprime[:N_minus]
        S = scan.backward_scan(inv, gnu[:N_minus] * inv, 0.0)
        delta = S[:-1] / vals[:N_minus] ** g
        value = float(delta.max())
        x = float(vals[0])
        r = 1.0 / (Le - c * x)
        if g > 1.0:
            out_left = math.inf
        else:
            E = math.exp(c * x * _geom(r) / (Le - 2.0 * c * x))
            out_left = E * (float(delta[0]) + x ** (nu - g) * _geom(r ** (nu - g)) / (Le - 2.0 * c * x))
        tail = _tail(value, out_left)
    elif spec.which == "mu_forward":
        lam = fp.mu_rate
        seed = gnu[-1] * lam / (1.0 - lam)
        S = scan.backward_scan(np.full(len(vals), lam), lam * gnu, seed)[:-1]
        delta = S / vals**g
        value = float(delta.max())
        seed_err = (gstar**nu - gnu[-1]) * lam / (1.0 - lam)
        inner = float(np.max(delta + seed_err * lam ** (N_plus + 1 - ns) / vals**g))
        out_left = float(vals[0]) ** (nu - g) * lam * _geom(lam * Le**nu) if nu >= g else math.inf
        out_right = gstar**nu * lam / (1.0 - lam) / float(vals[-1]) ** g
        tail = _tail(value, max(inner, out_left, out_right))
    else:
        cR = spec.c_R
        S = scan.forward_scan(np.full(len(vals), cR), gnu, 0.0)[:-1]
        delta = S / vals**g
        value = float(delta.max())
        g_before = f_inverse(float(vals[0]), fp)
        # the seed S_{-N} = 0 misses at most gbar_{-N-1}^nu / (1 - c_R)
        inner = float(np.max(delta + cR ** (ns + N_minus) * g_before**nu / (1.0 - cR) / vals**g))
        if nu >= g:
            out_left = float(vals[0]) ** (nu - g) / (1.0 - cR)
            # beyond the window Delta_n <= gbar_n^(nu-gamma)/(1-c_R), approached as n -> inf
            out_right = gstar ** (nu - g) / (1.0 - cR)
        else:
            out_left = math.inf
            out_right = max(float(S[-1]), gstar**nu / (1.0 - cR)) / float(vals[-1]) ** g
        tail = _tail(value, max(inner, out_left, out_right))

    if not math.isfinite(tail) or tail >= value:
        raise TruncationError(
            f"tail bound dominates the {spec.which} sum; enlarge the window",
            diagnostics={"value": value, "tail": tail, "window": [N_minus, N_plus]},
        )
    return value, tail


def bar_sigma(spec: SigmaSpec, fp: FlowParams, omega0: float) -> float:
    """Closed-form majorant of the sum over all integers."""
    _require(spec, fp, omega0)
    g, nu = spec.gamma, spec.nu
    gstar, Le = fp.gbar_star, fp.Le
    if spec.which == "R_backward":
        return gstar ** (nu - g) / (1.0 - spec.c_R)
    if spec.which == "mu_forward":
        return gstar ** (nu - g) / (fp.L ** ((3.0 + fp.eps) / 2.0) - Le**nu)
    if spec.which == "dg_backward":
        expo = 2.0 * (1.0 - omega0) * (1.0 + omega0 - Le * omega0) / (omega0 * (2.0 - Le))
        return omega0**-g * gstar ** (nu - g) / (Le - 1.0) * math.exp(expo)
    root = math.sqrt(Le * Le - 4.0 * omega0 * (Le - 1.0))
    expo = omega0 * (2.0 - Le + root) / ((1.0 - omega0) * (Le - 2.0 * omega0 * (Le - 1.0)))
    return (omega0 * gstar) ** (nu - g) / (1.0 - upsilon(fp, omega0, nu) ** nu) * math.exp(expo)


def k_constant(spec: SigmaSpec, fp: FlowParams, omega0: float):
    """Leading small-eps constant ``K`` and the power of eps it multiplies.

    ``gbar_star / eps`` tends to ``log L / a0`` (``fp.slope``); the constants
    below are written in terms of that slope.
    """
    g, nu = spec.gamma, spec.nu
    s = fp.slope
    logL = math.log(fp.L)
    if spec.which in ("R_backward", "mu_forward"):
        if not nu >= g >= 0:
            raise PreconditionError(f"{spec.which} constant needs nu >= gamma >= 0")
        denom = (1.0 - spec.c_R) if spec.which == "R_backward" else (fp.L**1.5 - 1.0)
        return s ** (nu - g) / denom, nu - g
    if spec.which == "dg_backward":
        K = s ** (nu - g) / (omega0**g * logL) * math.exp(2.0 * (1.0 - omega0) / omega0)
        return K, nu - g - 1.0
    if g != 1.0:
        raise PreconditionError("dg_forward constant is stated for gamma = 1")
    if not nu > 1.0 / (1.0 - omega0):
        raise PreconditionError(f"dg_forward constant needs nu > 1/(1-omega0) = {1.0 / (1.0 - omega0):.6g}")
    K = (omega0 * s) ** (nu - 1.0) / (logL * (nu * (1.0 - omega0) - 1.0)) * math.exp(2.0 * omega0 / (1.0 - omega0))
    return K, nu - 2.0
