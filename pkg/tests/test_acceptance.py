"""Acceptance criteria 1-12, one or more tests each.

A summary line per criterion is printed at the end of the pytest run.
"""
import math
import time

import numpy as np
import pytest

from crossover.bounds import SIGMA_KINDS, SigmaSpec, bar_sigma, k_constant, sigma_value
from crossover.errors import DomainError
from crossover.flow import FlowParams, build_gbar, default_window, step_bounds
from crossover.kernels import WICK_KINDS, build_kernels, riesz_check, wick_eval
from crossover.models.base import null_model
from crossover.models.hier import HierGrid, hier_flow_params, hier_linearization, hier_model
from crossover.models.oracle import ToyFlowParams, compare_orbit, toy_orbit_mu
from crossover.models.toy import poly_toy_model
from crossover.seqspace import NormWeights, calibrated_R_norm, quadruple_norm, solve_orbit, weighted_profile

GRID = [(L, eps, w0) for L in (2, 3) for eps in (0.02, 0.05, 0.1) for w0 in (0.1, 0.3, 0.49)]


# 1 ---------------------------------------------------------------------------


@pytest.mark.parametrize("L", [2, 3])
def test_criterion_01_literal_limit(L):
    t = time.perf_counter()
    a = build_kernels(L, 1e-3).a_coeff
    assert time.perf_counter() - t < 10
    target = math.log(L) / (18 * math.pi**2)
    assert abs(a - target) <= 0.01 * target, f"a({L}, 1e-3) = {a:.6g}, target {target:.6g}"


@pytest.mark.parametrize("L", [2, 3])
def test_criterion_01_derived_limit(L):
    a = build_kernels(L, 1e-3).a_coeff
    target = 18 * math.log(L) / math.pi**2
    assert abs(a - target) <= 0.01 * target


# 2 ---------------------------------------------------------------------------


@pytest.mark.parametrize("eps", [0.05, 0.1])
def test_criterion_02_riesz(eps):
    ks = build_kernels(2, eps)
    for r in (0.3, 1.0, 3.0):
        assert riesz_check(r, ks) < 1e-6


# 3 ---------------------------------------------------------------------------


def test_criterion_03_w_fixed_point():
    ks = build_kernels(2, 0.1)
    r = np.random.default_rng(0).uniform(0.05, 4.0, 20)
    for p in (1, 2, 3):
        lhs = ks.w(r, p) - ks.v(r, p) - ks.L ** (2 * p * ks.phi) * ks.w(ks.L * r, p)
        assert np.max(np.abs(lhs)) < 1e-8


# 4 ---------------------------------------------------------------------------


def test_criterion_04_wick_zero_mean():
    ks = build_kernels(2, 0.1)
    C0 = ks.C0
    Cxy = float(ks.C(0.7))
    rng = np.random.default_rng(12345)
    n = 10**6
    z = rng.multivariate_normal([0.0, 0.0], [[C0, Cxy], [Cxy, C0]], size=n)
    for kind in WICK_KINDS:
        vals = wick_eval(kind, z[:, 0], z[:, 1], C0, Cxy)
        se = vals.std(ddof=1) / math.sqrt(n)
        assert abs(vals.mean()) < 4 * se, kind


# 5 ---------------------------------------------------------------------------


def test_criterion_05_sandwich():
    t = time.perf_counter()
    for L, eps, w0 in GRID:
        fp = FlowParams(L, eps, 1.0)
        gs = build_gbar(w0, 200, fp)
        slack = 1e-12 * fp.gbar_star
        for n, g in zip(gs.ns, gs.values):
            lo, hi = step_bounds(int(n), gs)
            assert lo - slack <= g <= hi + slack, (L, eps, w0, int(n))
    assert time.perf_counter() - t < 5


# 6 ---------------------------------------------------------------------------

PAIRS = [(1.5, 3.0), (1.5, 11 / 4 - 3 / 16), (1.0, 2.0), (1.0, 11 / 4 - 3 / 16), (2 - 1 / 6, 2.0), (11 / 4 - 3 / 16, 11 / 4)]


@pytest.mark.parametrize("L,eps,w0", GRID)
def test_criterion_06_sum_below_majorant(L, eps, w0):
    fp = FlowParams(L, eps, 1.0)
    gs = build_gbar(w0, default_window(fp), fp)
    checked = 0
    for which in SIGMA_KINDS:
        for gamma, nu in PAIRS:
            if which == "dg_forward" and gamma > 1:
                continue  # majorant defined only for gamma <= 1
            spec = SigmaSpec(which, gamma, nu, c_R=0.5)
            value, tail = sigma_value(spec, gs)
            assert value + tail <= bar_sigma(spec, fp, w0), (which, gamma, nu)
            checked += 1
    assert checked == 20


# 7 ---------------------------------------------------------------------------

K_SPECS = [("R_backward", 1.0, 3.0), ("mu_forward", 1.0, 3.0), ("dg_backward", 1.0, 3.0), ("dg_forward", 1.0, 2.0)]


@pytest.mark.parametrize("which,gamma,nu", K_SPECS)
def test_criterion_07_small_eps_constants(which, gamma, nu):
    eps, w0, L = 1e-4, 0.3, 2
    fp = FlowParams(L, eps, math.log(L) / (18 * math.pi**2))
    spec = SigmaSpec(which, gamma, nu)
    K, power = k_constant(spec, fp, w0)
    scaled = bar_sigma(spec, fp, w0) * eps**-power
    assert abs(scaled - K) <= 0.02 * K


# 8 ---------------------------------------------------------------------------


def test_criterion_08_norm_comparison():
    rng = np.random.default_rng(8)
    checked = 0
    for L in (2, 3):
        for eps in (0.02, 0.05, 0.1, 0.2):
            fp = FlowParams(L, eps, 1.0)
            if max(fp.Le**2, (2 - fp.Le) ** -0.25) > 1.5:
                continue
            nw = NormWeights.for_flow(fp)
            gb = fp.gbar_star * rng.uniform(1e-12, 1.0, 1000)
            R = rng.normal(size=(1000, 8)) * rng.lognormal(0, 3, size=(1000, 1))
            fg = fp.Le * gb - fp.c * gb * gb
            assert np.all(calibrated_R_norm(R, fg, nw) <= 1.5 * calibrated_R_norm(R, gb, nw))
            checked += 1
    assert checked >= 6


# 9 ---------------------------------------------------------------------------


def test_criterion_09_null_model():
    fp = FlowParams(2, 0.1, build_kernels(2, 0.1).a_coeff)
    res = solve_orbit(null_model(fp), 0.3)
    ds = res.deviation
    assert not np.any(ds.delta_g) and not np.any(ds.mu) and not np.any(ds.R)
    assert np.array_equal(res.g, res.gbar.values)
    assert res.report.iterations == 1
    assert res.report.converged


# 10 --------------------------------------------------------------------------


def test_criterion_10_toy_end_to_end():
    t = time.perf_counter()
    eps, w0 = 0.05, 0.1
    ks = build_kernels(2, eps)
    fp = FlowParams(2, eps, ks.a_coeff)
    model = poly_toy_model(fp, ks=ks)
    res = solve_orbit(model, w0, tol=1e-12)
    rep = res.report
    gs, ds, nw = res.gbar, res.deviation, res.weights
    assert rep.converged
    assert all(c <= 0.5 for c in rep.measured_contraction[1:])
    assert rep.final_residual < 1e-10
    assert ds.delta_g[gs.n_minus] == 0.0

    g_star, mu_star, R_star = model.fixed_point()
    i = -1
    gb = gs.values[i]
    w = (
        abs(res.g[i] - g_star) * gb**-1.5,
        abs(ds.mu[i] - mu_star) * gb**-nw.mu_exp,
        float(model.R_norm((ds.R[i] - R_star)[None, :], np.array([gb]), nw)[0]) * gb**-nw.R_exp,
    )
    assert max(w) < 1e-8, w

    # left tail: the slowest weighted component (mass) decays like gbar^delta
    prof = weighted_profile(ds, gs, nw, model).max(axis=1)
    i0 = gs.n_minus
    left = prof[: i0 // 4]
    assert np.all(np.diff(left) > 0)
    assert left[0] <= 2.0 * prof[i0] * (gs.values[0] / gs.values[i0]) ** nw.delta
    assert left[0] < 1e-3 * prof.max()
    assert time.perf_counter() - t < 30


# 11 --------------------------------------------------------------------------


def test_criterion_11_eigenvalues_literal():
    eps = 0.1
    hg = HierGrid(2, eps, 0.004, (2, 4, 6, 8, 10))
    for k in (2, 4, 6, 8):
        lam = hier_linearization(hg, k)[k]
        target = 2 ** (3 - k * (3 - eps) / 2)
        assert abs(lam - target) < 1e-4, (k, lam, target)


def test_criterion_11_eigenvalues_scaling_dimension():
    eps = 0.1
    hg = HierGrid(2, eps, 0.004, (2, 4, 6, 8, 10))
    for k in (2, 4, 6, 8):
        lam = hier_linearization(hg, k)[k]
        assert abs(lam - 2 ** (3 - k * (3 - eps) / 4)) < 1e-4


def test_criterion_11_crossover_run():
    t = time.perf_counter()
    model = hier_model(2, 0.1)
    res = solve_orbit(model, 0.3)
    assert res.report.converged
    assert res.report.final_residual < 1e-8
    assert np.all(np.diff(res.g) > 0)
    assert quadruple_norm(res.deviation, res.gbar, res.weights, model) < res.config.beta
    assert time.perf_counter() - t < 300


def test_criterion_11_width_scaling():
    scaled = []
    for eps in (0.2, 0.1, 0.05):
        fp = hier_flow_params(2, eps)
        gs = build_gbar(0.3, default_window(fp), fp)
        x = gs.values / fp.gbar_star
        width = int(np.sum((x >= 0.1) & (x <= 0.9)))
        scaled.append(width * eps)
    assert max(scaled) / min(scaled) <= 2.0, scaled


# 12 --------------------------------------------------------------------------


def test_criterion_12_oracle():
    rep = compare_orbit(ToyFlowParams.from_nu(2.7), 0.05, 0.8)
    assert rep["max_rel_discrepancy"] < 1e-6
    for nu in (3.0, 4.0):
        with pytest.raises(DomainError):
            toy_orbit_mu(0.5, ToyFlowParams.from_nu(nu))
