"""Cutoff profile, scale-decomposed covariance kernels and Wick polynomials.

All kernels are radial functions of ``r = |x|`` in three dimensions. The
covariance is the scale integral

    C(r) = int_1^inf (dl/l) l^(-2[phi]) u_eps(r/l),   [phi] = (3 - eps)/4,

with ``u_eps = lambda_eps * u_0`` and ``u_0`` the normalized radial
self-convolution of a smooth bump.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, interpolate
from scipy.special import gamma as _gamma

from .errors import DomainError, NumericalError, UsageError

__all__ = [
    "kappa_eps",
    "phi_dim",
    "smooth_bump",
    "CutoffProfile",
    "build_cutoff",
    "lambda_eps",
    "KernelSet",
    "build_kernels",
    "covariance_C",
    "riesz_check",
    "fluctuation_Gamma",
    "kernels_vw",
    "coeff_a",
    "coeff_b",
    "wick_eval",
    "WICK_KINDS",
]


def phi_dim(eps: float) -> float:
    """Scaling dimension of the field, ``(3 - eps)/4``."""
    return (3.0 - eps) / 4.0


def kappa_eps(eps: float) -> float:
    """Normalization of the Riesz kernel of order ``(3 + eps)/2`` in 3D."""
    if not (0.0 <= eps < 3.0):
        raise DomainError(f"eps must lie in [0, 3), got {eps!r}")
    return (
        np.pi ** -1.5
        * 2.0 ** (-(3.0 + eps) / 2.0)
        * _gamma((3.0 - eps) / 4.0)
        / _gamma((3.0 + eps) / 4.0)
    )


def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = t > 0
    out[m] = np.exp(-1.0 / t[m])
    return out


def smooth_bump(r, r_in: float = 0.25, r_out: float = 0.5):
    """C-infinity radial step: 1 for ``r <= r_in``, 0 for ``r >= r_out``."""
    x = (np.asarray(r, dtype=float) - r_in) / (r_out - r_in)
    p, q = _psi(x), _psi(1.0 - x)
    return q / (p + q)


@dataclass(frozen=True)
class CutoffProfile:
    """A nonnegative radial profile with compact support.

    ``func`` maps an array of radii to values; it must already return zero
    at and beyond ``support_radius``.
    """

    func: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    closed_form: bool

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.where(r < self.support_radius, self.func(np.minimum(np.abs(r), self.support_radius)), 0.0)
        return out if out.ndim else float(out)


_GL10 = leggauss(10)
_GL16 = leggauss(16)
_GL24 = leggauss(24)
_GL32 = leggauss(32)


def _composite_nodes(edges, rule):
    """Nodes and weights of a composite Gauss-Legendre rule."""
    x, w = rule
    a = np.asarray(edges[:-1], dtype=float)[:, None]
    b = np.asarray(edges[1:], dtype=float)[:, None]
    half = (b - a) / 2.0
    return (a + b) / 2.0 + half * x, half * w


def _self_convolution(bump, r_in: float, r_out: float, n_table: int):
    """Tabulate the 3D self-convolution of a radial bump on [0, 2*r_out].

    Uses the shell reduction
    ``(f*f)(r) = (2 pi / r) int rho f(rho) [G(r + rho) - G(|r - rho|)] d rho``
    with ``G(t) = int_0^t tau f(tau) d tau``.
    """
    n_g = 20000
    tg = np.linspace(0.0, r_out, n_g + 1)
    xs, ws = _composite_nodes(tg, _GL10)
    G = np.concatenate([[0.0], np.cumsum((ws * xs * bump(xs)).sum(axis=1))])
    g_spline = interpolate.CubicSpline(tg, G)
    g_total = G[-1]

    def g_of(t):
        t = np.abs(t)
        return np.where(t >= r_out, g_total, g_spline(np.minimum(t, r_out)))

    radius = 2.0 * r_out
    rr = np.linspace(0.0, radius, n_table)
    vals = np.empty_like(rr)
    for i, r in enumerate(rr):
        if r == 0.0:
            cand = [r_in]
        else:
            cand = [r_in, r, r_out - r, r - r_in, r_in - r, r - r_out]
        pts = sorted({0.0, r_out, *[c for c in cand if 0.0 < c < r_out]})
        edges = np.concatenate(
            [np.linspace(pts[k], pts[k + 1], 7)[:-1] for k in range(len(pts) - 1)] + [[r_out]]
        )
        p, w = _composite_nodes(edges, _GL24)
        fp = bump(p)
        if r == 0.0:
            vals[i] = 4.0 * np.pi * np.sum(w * p * p * fp * fp)
        else:
            vals[i] = 2.0 * np.pi / r * np.sum(w * p * fp * (g_of(r + p) - g_of(r - p)))
    vals[-1] = 0.0
    return rr, np.maximum(vals, 0.0)


def _radial_moment(func, s: float, power: float) -> float:
    """``int_0^s t^power func(t) dt`` via ``t = x^2`` to tame the endpoint."""
    edges = np.linspace(0.0, np.sqrt(s), 257)
    x, w = _composite_nodes(edges, _GL16)
    return float(np.sum(w * 2.0 * x ** (2.0 * power + 1.0) * func(x * x)))


def build_cutoff(r_in: float = 0.25, r_out: float = 0.5, n_table: int = 4001):
    """Construct the bump ``varpi`` and the normalized profile ``u_0``.

    ``u_0`` is proportional to ``varpi * varpi`` and normalized so that its
    radial moment ``int_0^inf t^(1/2) u_0(t) dt`` equals ``kappa_eps(0)``,
    which makes the scale integral reproduce the Riesz kernel exactly.

    Parameters
    ----------
    r_in, r_out : float
        Plateau radius and support radius of ``varpi``. Admissible choices
        need ``0 < r_in < r_out <= 1/2``.
    n_table : int
        Number of radii on which the convolution is tabulated.

    Returns
    -------
    (CutoffProfile, CutoffProfile)
    """
    if not (0.0 < r_in < r_out <= 0.5):
        raise DomainError("need 0 < r_in < r_out <= 1/2")

    def varpi_fn(r):
        return smooth_bump(r, r_in, r_out)

    varpi = CutoffProfile(varpi_fn, r_out, True)
    rr, vals = _self_convolution(varpi_fn, r_in, r_out, n_table)
    if not np.all(np.isfinite(vals)) or vals[0] <= 0.0:
        raise NumericalError("self-convolution quadrature failed", diagnostics={"u0": float(vals[0])})
    spline = interpolate.CubicSpline(rr, vals)
    supp = 2.0 * r_out

    def raw(t):
        return np.maximum(spline(t), 0.0)

    moment = _radial_moment(lambda t: np.where(t < supp, raw(np.minimum(t, supp)), 0.0), supp, 0.5)
    scale = kappa_eps(0.0) / moment

    def u0_fn(t):
        return scale * raw(t)

    return varpi, CutoffProfile(u0_fn, supp, False)


def lambda_eps(u0: CutoffProfile, eps: float) -> float:
    """Factor making ``lambda_eps * u0`` reproduce the order-eps Riesz kernel."""
    m = _radial_moment(u0, u0.support_radius, (1.0 - eps) / 2.0)
    if not m > 0.0:
        raise NumericalError("moment underflow", diagnostics={"moment": m})
    return kappa_eps(eps) / m


@dataclass(frozen=True)
class KernelSet:
    """Radial covariance kernels at fixed ``(L, eps)``.

    Construct with :func:`build_kernels`. All evaluators accept scalars or
    arrays of radii.
    """

    L: int
    eps: float
    u0: CutoffProfile
    lam: float
    kappa: float
    phi: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def u(self, t):
        return self.lam * np.asarray(self.u0(t))

    @property
    def C0(self) -> float:
        return float(self.lam * self.u0(0.0) / (2.0 * self.phi))

    # C(r) = int_0^1 y^(2[phi]-1) u(r y) dy for r <= 1, and kappa r^(-2[phi]) beyond.
    def C(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise DomainError("radius must be nonnegative")
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        far = r >= 1.0
        out[far] = self.kappa * r[far] ** (-2.0 * self.phi)
        near = ~far
        if np.any(near):
            z, w = self._zrule()
            rn = r[near][:, None]
            # y = z^2, dy y^(2phi-1) = 2 z^(4phi-1) dz
            out[near] = np.sum(w * 2.0 * z ** (4.0 * self.phi - 1.0) * self.u(rn * z * z), axis=1)
        return float(out[0]) if scalar else out

    def _zrule(self):
        if "z" not in self._cache:
            z, w = _composite_nodes(np.linspace(0.0, 1.0, 17), _GL32)
            self._cache["z"] = (z.ravel(), w.ravel())
        return self._cache["z"]

    def C_tilde(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise DomainError("the scale-free kernel is defined for r > 0 only")
        return self.kappa * r ** (-2.0 * self.phi)

    def C_L(self, r):
        return self.L ** (2.0 * self.phi) * self.C(self.L * np.asarray(r, dtype=float))

    def Gamma(self, r):
        """Single-scale slice, integrated directly over ``l`` in [1, L]."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.zeros_like(r)
        live = r < self.L
        if np.any(live):
            x, w = _GL32
            # split [1, L] at l = r where u(r/l) leaves its support
            for i in np.flatnonzero(live):
                ri = r[i]
                brk = [1.0, float(self.L)]
                if 1.0 < ri < self.L:
                    brk.insert(1, ri)
                edges = np.concatenate(
                    [np.linspace(brk[k], brk[k + 1], 9)[:-1] for k in range(len(brk) - 1)] + [[brk[-1]]]
                )
                ll, ww = _composite_nodes(edges, (x, w))
                out[i] = np.sum(ww * ll ** (-2.0 * self.phi - 1.0) * self.u(ri / ll))
        return float(out[0]) if scalar else out

    def v(self, r, p: int):
        return self.C_L(r) ** p - self.C(r) ** p

    def w(self, r, p: int):
        return self.C_tilde(r) ** p - self.C(r) ** p

    def _coefficient(self, p: int, prefactor: float) -> float:
        key = ("coef", p)
        if key not in self._cache:
            edges = np.concatenate([np.linspace(0.0, 1.0 / self.L, 65)[:-1], np.linspace(1.0 / self.L, 1.0, 65)])
            r, w = _composite_nodes(edges, _GL16)
            val = prefactor * 4.0 * np.pi * float(np.sum(w * r * r * self.v(r.ravel(), p).reshape(r.shape)))
            if not np.isfinite(val):
                raise NumericalError("coefficient quadrature failed", diagnostics={"p": p})
            self._cache[key] = val
        return self._cache[key]

    @property
    def a_coeff(self) -> float:
        return self._coefficient(2, 36.0)

    @property
    def b_coeff(self) -> float:
        return self._coefficient(3, 48.0)


_CUTOFF_CACHE: dict = {}


def _default_u0():
    if "default" not in _CUTOFF_CACHE:
        _CUTOFF_CACHE["default"] = build_cutoff()[1]
    return _CUTOFF_CACHE["default"]


def build_kernels(L: int, eps: float, u0: CutoffProfile | None = None) -> KernelSet:
    """Build the kernel set for block size ``L`` and deviation ``eps``."""
    if int(L) != L or L < 2:
        raise DomainError(f"L must be an integer >= 2, got {L!r}")
    if not (0.0 <= eps < 1.0):
        raise DomainError(f"eps must lie in [0, 1), got {eps!r}")
    u0 = _default_u0() if u0 is None else u0
    return KernelSet(int(L), float(eps), u0, lambda_eps(u0, eps), kappa_eps(eps), phi_dim(eps))


def covariance_C(r, ks: KernelSet):
    return ks.C(r)


def fluctuation_Gamma(r, ks: KernelSet):
    return ks.Gamma(r)


def riesz_check(r: float, ks: KernelSet) -> float:
    """Relative error of the full scale integral against the Riesz kernel.

    Integrates ``int_0^inf (dl/l) l^(-2[phi]) u(r/l)`` over ``l`` directly.
    """
    if not r > 0:
        raise DomainError("riesz_check needs r > 0")
    lo = r / ks.u0.support_radius
    e = -2.0 * ks.phi - 1.0
    # finite part [lo, lo*64] plus the tail where u(r/l) is near u(0)
    head = integrate.quad(lambda l: l ** e * ks.u(r / l), lo, 64.0 * lo, epsabs=0.0, epsrel=1e-12, limit=400)[0]
    tail = integrate.quad(lambda l: l ** e * ks.u(r / l), 64.0 * lo, np.inf, epsabs=0.0, epsrel=1e-12, limit=400)[0]
    exact = ks.kappa * r ** (-2.0 * ks.phi)
    return abs(head + tail - exact) / exact


def kernels_vw(ks: KernelSet, p: int):
    """Return ``(v_p, w_p)`` evaluators."""
    if p not in (1, 2, 3, 4):
        raise DomainError(f"p must be in 1..4, got {p}")

    def v(r):
        if p == 1:
            raise DomainError("v is defined for p in {2, 3, 4}")
        return ks.v(r, p)

    def w(r):
        if p == 4:
            raise DomainError("w is defined for p in {1, 2, 3}")
        return ks.w(r, p)

    return v, w


def coeff_a(ks: KernelSet) -> float:
    return ks.a_coeff


def coeff_b(ks: KernelSet) -> float:
    return ks.b_coeff


WICK_KINDS = ("phi2", "phi4", "bilocal_diff2", "bilocal_sq2", "bilocal_cube3")


def wick_eval(kind: str, phi_x, phi_y=0.0, C0=1.0, Cxy=0.0):
    """Evaluate a Wick-ordered polynomial with covariance data ``(C0, Cxy)``.

    Works elementwise on arrays.
    """
    x = np.asarray(phi_x, dtype=float)
    y = np.asarray(phi_y, dtype=float)
    if kind == "phi2":
        return x * x - C0
    if kind == "phi4":
        return x**4 - 6.0 * C0 * x * x + 3.0 * C0 * C0
    if kind == "bilocal_diff2":
        return (x - y) ** 2 - 2.0 * C0 + 2.0 * Cxy
    if kind == "bilocal_sq2":
        return (
            (x * x - y * y) ** 2
            - 4.0 * C0 * (x * x + y * y)
            + 8.0 * Cxy * x * y
            + 4.0 * C0 * C0
            - 4.0 * Cxy * Cxy
        )
    if kind == "bilocal_cube3":
        return (
            x**3 * y**3
            - 3.0 * C0 * (x * y**3 + x**3 * y)
            - 9.0 * Cxy * x * x * y * y
            + (9.0 * C0 * C0 + 18.0 * Cxy * Cxy) * x * y
            + 9.0 * C0 * Cxy * (x * x + y * y)
            - 9.0 * C0 * C0 * Cxy
            - 6.0 * Cxy**3
        )
    raise UsageError(f"unknown Wick kind {kind!r}; expected one of {WICK_KINDS}")
