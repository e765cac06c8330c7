"""A continuous toy flow whose connecting orbit is known in closed form.

The flow ``dg/dl = alpha g - beta g^2``, ``dmu/dl = gamma mu - delta g^2``
has the orbit equation

    dmu/dg = (gamma mu - delta g^2) / (alpha g - beta g^2).

In the rescaled variables ``s = beta g / alpha`` and
``m = beta^2 mu / (delta alpha)`` it reads ``dm/ds = (nu m - s^2) / (s (1-s))``
with ``nu = gamma / alpha``. The orbit that stays bounded at the fixed point
``s = 1`` is

    m(s) = (1-s)^(-nu) [ s^nu pi(nu-1)/sin(pi(nu-1))
                         + s^2/(nu-2) 2F1(1-nu, 2-nu; 3-nu; s) ].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from ..errors import DomainError, NumericalError

__all__ = [
    "ToyFlowParams",
    "hyper_2f1",
    "hyper_2f1_euler",
    "toy_orbit_mu",
    "toy_orbit_rk4",
    "orbit_series_coeffs",
    "smoothness_probe",
    "compare_orbit",
]


@dataclass(frozen=True)
class ToyFlowParams:
    alpha: float
    beta_c: float
    gamma_c: float
    delta_c: float

    def __post_init__(self):
        for name in ("alpha", "beta_c", "gamma_c", "delta_c"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive real, got {v!r}")

    @property
    def nu(self) -> float:
        return self.gamma_c / self.alpha

    def to_physical(self, s, m):
        """Map rescaled ``(s, m)`` back to ``(g, mu)``."""
        s = np.asarray(s, dtype=float)
        return self.alpha * s / self.beta_c, np.asarray(m, dtype=float) * self.delta_c * self.alpha / self.beta_c**2

    def to_rescaled(self, g, mu):
        g = np.asarray(g, dtype=float)
        return self.beta_c * g / self.alpha, np.asarray(mu, dtype=float) * self.beta_c**2 / (self.delta_c * self.alpha)

    @classmethod
    def from_nu(cls, nu: float) -> "ToyFlowParams":
        """Unit flow with ``gamma / alpha = nu``."""
        return cls(1.0, 1.0, float(nu), 1.0)


def _is_int(x: float) -> bool:
    return float(x).is_integer()


def hyper_2f1(a: float, b: float, c: float, s: float, rtol: float = 1e-12, max_terms: int = 100_000) -> float:
    """Gauss hypergeometric series ``2F1(a, b; c; s)`` for ``|s| < 1``.

    Summation stops once a geometric bound on the remaining terms falls
    below ``rtol`` times the partial sum.
    """
    if not abs(s) < 1.0:
        raise DomainError(f"series needs |s| < 1, got s={s!r}")
    if c <= 0 and _is_int(c):
        raise DomainError(f"c must not be a nonpositive integer, got c={c!r}")
    total = 1.0
    term = 1.0
    big = 2.0 * max(abs(a), abs(b), abs(c), 1.0)
    for k in range(max_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * s
        total += term
        if term == 0.0:
            return total
        j = k + 1.0
        if j > big:
            # for j >= k+1 the ratio modulus is below this decreasing majorant
            rho = abs(s) * (1.0 + abs(a) / j) * (1.0 + abs(b) / j) / (1.0 - abs(c) / j)
            if rho < 1.0:
                tail = abs(term) * rho / (1.0 - rho)
                if tail <= rtol * abs(total):
                    return total
    raise NumericalError(
        f"2F1 series did not converge in {max_terms} terms",
        diagnostics={"a": a, "b": b, "c": c, "s": s, "partial": total},
    )


def hyper_2f1_euler(a: float, b: float, c: float, s: float) -> float:
    """Euler integral representation, valid for ``c > b > 0`` and ``s < 1``."""
    if not (c > b > 0):
        raise DomainError("Euler integral needs c > b > 0")
    val, _ = integrate.quad(
        lambda t: t ** (b - 1.0) * (1.0 - t) ** (c - b - 1.0) * (1.0 - s * t) ** (-a),
        0.0,
        1.0,
        epsabs=0.0,
        epsrel=1e-13,
        limit=200,
    )
    return math.exp(special.gammaln(c) - special.gammaln(b) - special.gammaln(c - b)) * val


def _check_nu(nu: float):
    if _is_int(nu):
        raise DomainError(
            f"closed-form orbit requires non-integer nu, got nu={nu!r}",
            diagnostics={"nu": nu},
        )
    if not nu > 2.0:
        raise DomainError(f"closed-form orbit requires nu > 2, got nu={nu!r}", diagnostics={"nu": nu})


def toy_orbit_mu(s, tf: ToyFlowParams):
    """Rescaled mass ``m(s)`` on the bounded orbit, ``0 < s < 1``."""
    nu = tf.nu
    _check_nu(nu)
    arr = np.asarray(s, dtype=float)
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise DomainError("s must lie in (0, 1)")
    const = math.pi * (nu - 1.0) / math.sin(math.pi * (nu - 1.0))

    def one(x):
        F = x**nu * const + x * x / (nu - 2.0) * hyper_2f1(1.0 - nu, 2.0 - nu, 3.0 - nu, x)
        return F * (1.0 - x) ** (-nu)

    out = np.array([one(float(x)) for x in arr.ravel()]).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def orbit_series_coeffs(nu: float, n_terms: int = 60) -> np.ndarray:
    """Taylor coefficients of ``m`` in ``t = 1 - s`` on the bounded orbit."""
    r = np.zeros(n_terms)
    r[: min(3, n_terms)] = [1.0, -2.0, 1.0][: min(3, n_terms)]
    c = np.zeros(n_terms)
    c[0] = 1.0 / nu
    for k in range(1, n_terms):
        c[k] = (r[k] + (k - 1) * c[k - 1]) / (k + nu)
    return c


def toy_orbit_rk4(s_eval, tf: ToyFlowParams, t0: float = 1e-3, h: float = 2e-5):
    """Independent RK4 integration of the bounded orbit.

    The orbit is seeded at ``s = 1 - t0`` from its Taylor series about the
    fixed point and integrated towards ``s = 0`` with fixed step ``h`` in
    ``t = 1 - s``. Returns ``m`` at ``s_eval`` by cubic Hermite interpolation
    between steps.
    """
    nu = tf.nu
    if not nu > 0:
        raise DomainError("nu must be positive")
    s_eval = np.atleast_1d(np.asarray(s_eval, dtype=float))
    if np.any((s_eval <= 0.0) | (s_eval > 1.0 - t0)):
        raise DomainError(f"evaluation points must lie in (0, {1.0 - t0}]")
    c = orbit_series_coeffs(nu)
    m = float(np.polynomial.polynomial.polyval(t0, c))

    def rhs(t, y):
        # dm/dt = -(nu m - (1-t)^2) / ((1-t) t)
        return -(nu * y - (1.0 - t) ** 2) / ((1.0 - t) * t)

    t_end = 1.0 - float(s_eval.min())
    n = int(math.ceil((t_end - t0) / h))
    ts = t0 + h * np.arange(n + 1)
    ys = np.empty(n + 1)
    ds = np.empty(n + 1)
    ys[0] = m
    ds[0] = rhs(t0, m)
    for i in range(n):
        t, y = ts[i], ys[i]
        k1 = ds[i]
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        ys[i + 1] = y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        ds[i + 1] = rhs(ts[i + 1], ys[i + 1])
    t_eval = 1.0 - s_eval
    idx = np.clip(np.searchsorted(ts, t_eval) - 1, 0, n - 1)
    u = (t_eval - ts[idx]) / h
    h00, h10, h01, h11 = 2 * u**3 - 3 * u**2 + 1, u**3 - 2 * u**2 + u, -2 * u**3 + 3 * u**2, u**3 - u**2
    return h00 * ys[idx] + h10 * h * ds[idx] + h01 * ys[idx + 1] + h11 * h * ds[idx + 1]


def compare_orbit(tf: ToyFlowParams, s_min: float = 0.05, s_max: float = 0.8, n: int = 76) -> dict:
    """Closed form against RK4 on a uniform grid of ``s``."""
    s = np.linspace(s_min, s_max, n)
    exact = toy_orbit_mu(s, tf)
    ode = toy_orbit_rk4(s, tf)
    rel = np.abs(exact - ode) / np.abs(ode)
    return {
        "nu": tf.nu,
        "s": s.tolist(),
        "closed_form": exact.tolist(),
        "rk4": ode.tolist(),
        "max_rel_discrepancy": float(rel.max()),
    }


def smoothness_probe(tf: ToyFlowParams, hs=(1e-3, 3e-4, 1e-4, 3e-5, 1e-5), order: int | None = None) -> dict:
    """Forward differences of ``m`` at ``s = 0`` of order ``ceil(nu)``.

    For a ``C^k`` function ``Delta^k m(0) / h^k`` stays bounded as ``h -> 0``;
    the ``s^nu`` piece makes it grow like ``h^(nu - k)``. Returns the scaled
    differences and the fitted exponent.
    """
    nu = tf.nu
    _check_nu(nu)
    k = int(math.ceil(nu)) if order is None else int(order)
    vals = []
    for h in hs:
        pts = np.array([toy_orbit_mu(j * h, tf) if j else 0.0 for j in range(k + 1)])
        diff = sum((-1) ** (k - j) * math.comb(k, j) * pts[j] for j in range(k + 1))
        vals.append(abs(diff) / h**k)
    slope = float(np.polyfit(np.log(hs), np.log(vals), 1)[0])
    return {"order": k, "h": list(hs), "scaled_difference": vals, "exponent": slope, "expected_exponent": nu - k}
