"""Deviation sequences, the weighted sup norm, and the Picard solver.

A deviation sequence ``(dg_n, mu_n, R_n)`` on a finite window describes the
orbit ``g_n = gbar_n + dg_n`` of the full recursion

    g_{n+1}  = f(g_n) + xi_g
    mu_{n+1} = L^((3+eps)/2) mu_n + xi_mu
    R_{n+1}  = Lin(g_n, mu_n) R_n + xi_R

The map :func:`apply_m` solves the stable directions forward and the
unstable ones backward; its fixed points are orbits of the recursion with
``dg_0 = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import scan
from .errors import DivergenceError, DomainError, PreconditionError, UsageError
from .flow import FlowParams, GbarSequence, build_gbar, default_window

__all__ = [
    "NormWeights",
    "DeviationSequence",
    "SolverConfig",
    "SolverReport",
    "calibrated_R_norm",
    "quadruple_norm",
    "weighted_profile",
    "apply_m",
    "apply_m_composed",
    "recursion_defects",
    "recursion_residual",
    "solve_fixed_point",
    "default_beta",
    "beta_limit",
    "OrbitResult",
    "solve_orbit",
]


@dataclass(frozen=True)
class NormWeights:
    """Exponents and calibrator data of the sequence norm.

    ``h_star`` defaults to ``L^((3+eps)/4)`` once bound to a flow with
    :meth:`for_flow`.
    """

    delta: float = 1.0 / 6.0
    eta: float = 3.0 / 16.0
    c_norm: float = 1.0
    h_star: float = 1.0
    weight_cap: int = 9

    def __post_init__(self):
        if not (0.0 <= self.delta <= 1.0 / 6.0):
            raise DomainError("delta must lie in [0, 1/6]")
        if not (0.0 <= self.eta <= 3.0 / 16.0):
            raise DomainError("eta must lie in [0, 3/16]")
        if not (self.c_norm > 0 and self.h_star > 0):
            raise DomainError("c_norm and h_star must be positive")

    @classmethod
    def for_flow(cls, fp: FlowParams, **kw) -> "NormWeights":
        return cls(h_star=fp.L ** ((3.0 + fp.eps) / 4.0), **kw)

    @staticmethod
    def e(n):
        return np.where(np.asarray(n) <= 0, 1.0, 1.5)

    @property
    def mu_exp(self) -> float:
        return 2.0 - self.delta

    @property
    def R_exp(self) -> float:
        return 11.0 / 4.0 - self.eta


def calibrated_R_norm(R, gbar, nw: NormWeights, index=None):
    """``max(sum_j h*^j |R_j|, gbar^2 sum_j (c gbar^(-1/4))^j |R_j|)``.

    ``R`` has shape ``(..., d)`` and ``gbar`` broadcasts against
    ``R[..., 0]``. ``index`` gives the weight index ``j`` of each of the
    ``d`` components (default ``0..d-1``).
    """
    R = np.abs(np.asarray(R, dtype=float))
    gbar = np.asarray(gbar, dtype=float)
    if np.any(gbar <= 0):
        raise DomainError("calibrator must be positive")
    d = R.shape[-1]
    j = np.arange(d) if index is None else np.asarray(index)
    if np.any(j < 0) or np.any(j > nw.weight_cap):
        raise DomainError(f"weight index outside 0..{nw.weight_cap}")
    flat = np.sum(nw.h_star**j * R, axis=-1)
    h = nw.c_norm * gbar[..., None] ** -0.25
    large = gbar**2 * np.sum(h**j * R, axis=-1)
    return np.maximum(flat, large)


@dataclass
class DeviationSequence:
    n_minus: int
    n_plus: int
    delta_g: np.ndarray
    mu: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        n = self.n_minus + self.n_plus + 1
        self.delta_g = np.asarray(self.delta_g, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        if self.delta_g.shape != (n,) or self.mu.shape != (n,) or self.R.ndim != 2 or self.R.shape[0] != n:
            raise UsageError("entry arrays do not match the window")

    @classmethod
    def zeros(cls, window, dim: int) -> "DeviationSequence":
        n_minus, n_plus = window
        n = n_minus + n_plus + 1
        return cls(n_minus, n_plus, np.zeros(n), np.zeros(n), np.zeros((n, dim)))

    @property
    def window(self):
        return (self.n_minus, self.n_plus)

    @property
    def ns(self):
        return np.arange(-self.n_minus, self.n_plus + 1)

    @property
    def dim(self) -> int:
        return self.R.shape[1]

    def _same(self, other):
        if self.window != other.window or self.dim != other.dim:
            raise UsageError("window or dimension mismatch")

    def __sub__(self, other):
        self._same(other)
        return DeviationSequence(*self.window, self.delta_g - other.delta_g, self.mu - other.mu, self.R - other.R)

    def __add__(self, other):
        self._same(other)
        return DeviationSequence(*self.window, self.delta_g + other.delta_g, self.mu + other.mu, self.R + other.R)

    def scale(self, s: float):
        return DeviationSequence(*self.window, s * self.delta_g, s * self.mu, s * self.R)

    def copy(self):
        return DeviationSequence(*self.window, self.delta_g.copy(), self.mu.copy(), self.R.copy())

    def all_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.delta_g)) and np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.R)))


def _check_windows(ds: DeviationSequence, gs: GbarSequence):
    if ds.window != gs.window:
        raise UsageError(f"window mismatch: sequence {ds.window} vs orbit {gs.window}")


def weighted_profile(ds: DeviationSequence, gs: GbarSequence, nw: NormWeights, model) -> np.ndarray:
    """Per-index weighted sizes, shape ``(N, 3)``: columns dg, mu, R."""
    _check_windows(ds, gs)
    gb = gs.values
    out = np.empty((len(gb), 3))
    out[:, 0] = np.abs(ds.delta_g) * gb ** -nw.e(gs.ns)
    out[:, 1] = np.abs(ds.mu) * gb ** -nw.mu_exp
    out[:, 2] = model.R_norm(ds.R, gb, nw) * gb ** -nw.R_exp
    return out


def quadruple_norm(ds: DeviationSequence, gs: GbarSequence, nw: NormWeights, model) -> float:
    return float(np.max(weighted_profile(ds, gs, nw, model)))


def _orbit(ds: DeviationSequence, gs: GbarSequence):
    return gs.values + ds.delta_g


def _check_domain(ds, gs, nw, model):
    gb = gs.values
    ns = gs.ns
    tests = (
        ("g", np.abs(ds.delta_g) < model.A_g * gb),
        ("mu", np.abs(ds.mu) < model.A_mu * gb**nw.mu_exp),
        ("R", model.R_norm(ds.R, gb, nw) < model.A_R * gb**nw.R_exp),
    )
    for name, ok in tests:
        if not np.all(ok):
            n = int(ns[np.argmin(ok)])
            raise DomainError(f"sequence leaves the {name}-domain at n={n}", diagnostics={"n": n, "component": name})


def _tails(gs, fp, nw, model):
    lam = fp.mu_rate
    ns = gs.ns
    # the seed continues xi_mu at the right edge; the rest differs by at most 2 B_mu gbar*^2 per term
    mu_tail = 2.0 * model.B_mu * fp.gbar_star**2 * lam ** (gs.n_plus - ns + 1) / (1.0 - lam)
    g_left = 2.0 * float(gs.values[0]) / (fp.Le + math.sqrt(fp.Le**2 - 4.0 * fp.c * float(gs.values[0])))
    cR = model.c_R
    R_tail = 1.5 * model.B_Rxi * g_left**2.75 * cR ** (ns + gs.n_minus) / (1.0 - cR)
    return {"mu": mu_tail, "R": R_tail}


def _remainders(ds, gs, fp, nw, model, check_domain):
    _check_windows(ds, gs)
    if check_domain:
        _check_domain(ds, gs, nw, model)
    g = _orbit(ds, gs)
    xg, xm, xR = (np.asarray(x, dtype=float) for x in model.remainders(g, ds.mu, ds.R))
    return g, xg, xm, xR


def apply_m(ds: DeviationSequence, gs: GbarSequence, fp: FlowParams, nw: NormWeights, model, check_domain=True):
    """Image of ``ds`` under the sequence map, with truncation tails.

    Returns ``(image, tails)`` where ``tails["mu"]`` and ``tails["R"]`` are
    per-index bounds on what the finite window leaves out.
    """
    g, xg, xm, xR = _remainders(ds, gs, fp, nw, model, check_domain)
    gb = gs.values
    i0 = gs.n_minus
    fprime = fp.Le - 2.0 * fp.c * gb
    F = -fp.c * ds.delta_g**2 + xg

    dg = np.empty_like(gb)
    dg[i0:] = scan.forward_scan(fprime[i0:-1], F[i0:-1], 0.0)
    if i0:
        inv = 1.0 / fprime[:i0]
        dg[: i0 + 1] = scan.backward_scan(inv, -F[:i0] * inv, 0.0)
    dg[i0] = 0.0

    lam = fp.mu_rate
    mu = scan.backward_scan(np.full(len(gb), lam), -lam * xm, _mu_seed(xm, lam))[:-1]

    R = _forward_R(g, ds, xR, model)
    return DeviationSequence(ds.n_minus, ds.n_plus, dg, mu, R), _tails(gs, fp, nw, model)


def _mu_seed(xm, lam):
    """Mass sum beyond the window, continuing the last remainder geometrically."""
    return -lam * float(xm[-1]) / (1.0 - lam)


def _forward_R(g, ds, xR, model):
    """``R'_{n+1} = Lin_n R'_n + xi_R,n`` seeded with zero at the left edge."""
    n, d = ds.R.shape
    diag = model.L_diag(g, ds.mu)
    R = np.zeros((n, d))
    if diag is not None:
        diag = np.broadcast_to(np.asarray(diag, dtype=float), (n, d))
        for k in range(d):
            R[:, k] = scan.forward_scan(diag[:-1, k], xR[:-1, k], 0.0)
        return R
    for i in range(1, n):
        R[i] = model.apply_L(g[i - 1 : i], ds.mu[i - 1 : i], R[i - 1 : i])[0] + xR[i - 1]
    return R


def apply_m_composed(ds, gs, fp, nw, model):
    """Reference O(N^2) evaluation of the map through its explicit sums.

    Meant for testing the streaming implementation on short windows.
    """
    g, xg, xm, xR = _remainders(ds, gs, fp, nw, model, False)
    gb = gs.values
    ns = gs.ns
    N = len(gb)
    i0 = gs.n_minus
    fprime = fp.Le - 2.0 * fp.c * gb
    F = -fp.c * ds.delta_g**2 + xg
    lam = fp.mu_rate
    dg = np.zeros(N)
    mu = np.zeros(N)
    R = np.zeros_like(ds.R)
    for i, n in enumerate(ns):
        if n > 0:
            dg[i] = sum(np.prod(fprime[p + 1 : i]) * F[p] for p in range(i0, i))
        elif n < 0:
            dg[i] = -sum(np.prod(1.0 / fprime[i : p + 1]) * F[p] for p in range(i, i0))
        mu[i] = -sum(lam ** (p - i + 1) * xm[p] for p in range(i, N)) + lam ** (N - i) * _mu_seed(xm, lam)
        acc = np.zeros(ds.dim)
        for p in range(0, i):
            term = xR[p : p + 1].copy()
            for j in range(p + 1, i):
                term = model.apply_L(g[j : j + 1], ds.mu[j : j + 1], term)
            acc += term[0]
        R[i] = acc
    return DeviationSequence(ds.n_minus, ds.n_plus, dg, mu, R)


def recursion_defects(ds, gs, fp, nw, model) -> np.ndarray:
    """Weighted defects of the recursion at ``n = -N_minus .. N_plus - 1``.

    Shape ``(N - 1, 3)``; each row holds the dg, mu and R defects of the
    step ``n -> n+1`` weighted like the norm at ``n + 1``.
    """
    g, xg, xm, xR = _remainders(ds, gs, fp, nw, model, False)
    gb = gs.values
    ns = gs.ns
    fprime = fp.Le - 2.0 * fp.c * gb
    d_g = ds.delta_g[1:] - (fprime[:-1] * ds.delta_g[:-1] - fp.c * ds.delta_g[:-1] ** 2 + xg[:-1])
    d_mu = ds.mu[1:] - (fp.L ** ((3.0 + fp.eps) / 2.0) * ds.mu[:-1] + xm[:-1])
    d_R = ds.R[1:] - (model.apply_L(g[:-1], ds.mu[:-1], ds.R[:-1]) + xR[:-1])
    out = np.empty((len(gb) - 1, 3))
    out[:, 0] = np.abs(d_g) * gb[1:] ** -nw.e(ns[1:])
    out[:, 1] = np.abs(d_mu) * gb[1:] ** -nw.mu_exp
    out[:, 2] = model.R_norm(d_R, gb[1:], nw) * gb[1:] ** -nw.R_exp
    return out


def recursion_residual(ds, gs, fp, nw, model) -> float:
    return float(np.max(recursion_defects(ds, gs, fp, nw, model)))


def beta_limit(omega0: float) -> float:
    """Largest admissible ball radius for a given ``omega0``."""
    if not (0.0 < omega0 < 0.5):
        raise DomainError("omega0 must lie in (0, 1/2)")
    return (1.0 - 2.0 * omega0) / (6.0 * omega0) * math.exp(-2.0 * omega0 / (1.0 - omega0))


def default_beta(omega0: float) -> float:
    return 0.5 * beta_limit(omega0)


@dataclass(frozen=True)
class SolverConfig:
    beta: float
    max_iter: int = 200
    tol: float = 1e-12
    contraction_budget: float = 0.5
    c_R: float = 0.5
    omega0: float | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise DomainError("beta must be positive")
        if self.omega0 is not None and not self.beta < beta_limit(self.omega0):
            raise PreconditionError(
                f"beta={self.beta:.6g} violates the ball constraint beta < {beta_limit(self.omega0):.6g}"
            )
        if self.max_iter < 1 or not self.tol > 0:
            raise DomainError("need max_iter >= 1 and tol > 0")

    @classmethod
    def for_omega0(cls, omega0: float, **kw) -> "SolverConfig":
        return cls(beta=default_beta(omega0), omega0=omega0, **kw)


@dataclass
class SolverReport:
    iterates_norms: list = field(default_factory=list)
    differences: list = field(default_factory=list)
    measured_contraction: list = field(default_factory=list)
    final_residual: float = math.nan
    tail_bounds: dict = field(default_factory=dict)
    converged: bool = False
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_residual": self.final_residual,
            "iterates_norms": list(self.iterates_norms),
            "differences": list(self.differences),
            "measured_contraction": list(self.measured_contraction),
            "tail_bounds": dict(self.tail_bounds),
        }


def solve_fixed_point(initial, cfg: SolverConfig, gs, fp, nw, model):
    """Picard iteration of :func:`apply_m` inside the ball of radius ``beta``.

    Returns ``(fixed_point, report)``. Raises :class:`DivergenceError` if an
    iterate leaves the ball.
    """
    if model.c_R > cfg.c_R:
        raise PreconditionError(f"model contraction {model.c_R:.6g} exceeds the allowed {cfg.c_R:.6g}")
    start = quadruple_norm(initial, gs, nw, model)
    if start > cfg.beta / 6.0:
        raise PreconditionError(f"initial norm {start:.6g} exceeds beta/6")
    report = SolverReport()
    x = initial
    prev_diff = None
    tails = {}
    for it in range(1, cfg.max_iter + 1):
        y, tails = apply_m(x, gs, fp, nw, model)
        if not y.all_finite():
            raise DivergenceError("non-finite iterate", diagnostics={"iteration": it})
        prof = weighted_profile(y, gs, nw, model)
        norm = float(prof.max())
        if norm > cfg.beta:
            n = int(gs.ns[np.argmax(prof.max(axis=1))])
            raise DivergenceError(
                f"iterate {it} leaves the ball (norm {norm:.6g} > beta {cfg.beta:.6g}) at n={n}",
                diagnostics={"iteration": it, "n": n, "norm": norm},
            )
        diff = quadruple_norm(y - x, gs, nw, model)
        report.iterates_norms.append(norm)
        report.differences.append(diff)
        if prev_diff is not None and prev_diff > 0:
            report.measured_contraction.append(diff / prev_diff)
        prev_diff = diff
        x = y
        report.iterations = it
        if diff <= cfg.tol:
            report.final_residual = recursion_residual(x, gs, fp, nw, model)
            if report.final_residual <= cfg.tol:
                break
    else:
        report.final_residual = recursion_residual(x, gs, fp, nw, model)
    w_mu = tails["mu"] * gs.values ** -nw.mu_exp
    w_R = tails["R"] * gs.values ** -nw.R_exp
    report.tail_bounds = {"mu_weighted_max": float(w_mu.max()), "R_weighted_max": float(w_R.max())}
    last_ok = not report.measured_contraction or report.measured_contraction[-1] <= cfg.contraction_budget + 0.05
    report.converged = bool(report.differences[-1] <= cfg.tol and report.final_residual <= cfg.tol and last_ok)
    return x, report


@dataclass
class OrbitResult:
    gbar: GbarSequence
    deviation: DeviationSequence
    report: SolverReport
    config: SolverConfig
    weights: NormWeights

    @property
    def ns(self) -> np.ndarray:
        return self.gbar.ns

    @property
    def g(self) -> np.ndarray:
        return self.gbar.values + self.deviation.delta_g

    def defects(self, model) -> np.ndarray:
        return recursion_defects(self.deviation, self.gbar, self.gbar.fp, self.weights, model)


def solve_orbit(model, omega0: float, window=None, tol=None, max_iter: int = 200, beta=None, nw=None):
    """Crossover orbit of ``model`` through ``gbar_0 = omega0 * gbar_star``.

    Starts the Picard iteration from the zero deviation. ``beta`` defaults to
    the model's ``beta_hint`` or else :func:`default_beta`; ``nw`` to the
    model's own weights or else :meth:`NormWeights.for_flow`; ``window`` and
    ``tol`` to the model's ``orbit_window()`` and ``tol_hint``.
    """
    fp = model.fp
    nw = nw or model.nw or NormWeights.for_flow(fp)
    if beta is None:
        beta = model.beta_hint if model.beta_hint is not None else default_beta(omega0)
    if tol is None:
        tol = getattr(model, "tol_hint", 1e-10)
    if window is None:
        window = model.orbit_window() if hasattr(model, "orbit_window") else default_window(fp)
    cfg = SolverConfig(beta=beta, max_iter=max_iter, tol=tol, omega0=omega0)
    gs = build_gbar(omega0, window, fp)
    start = DeviationSequence.zeros(gs.window, model.dim)
    ds, report = solve_fixed_point(start, cfg, gs, fp, nw, model)
    return OrbitResult(gs, ds, report, cfg, nw)
