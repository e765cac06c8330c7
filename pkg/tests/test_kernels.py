import math

import numpy as np
import pytest
from scipy import integrate

from crossover.errors import DomainError, UsageError
from crossover.kernels import (
    WICK_KINDS,
    build_cutoff,
    build_kernels,
    kappa_eps,
    kernels_vw,
    phi_dim,
    riesz_check,
    smooth_bump,
    wick_eval,
)


def test_phi_dim_and_kappa_closed_form():
    assert phi_dim(0.0) == 0.75
    assert phi_dim(0.1) == pytest.approx(0.725)
    # kappa_0 = Gamma(3/4) / (2^(3/2) pi^(3/2) Gamma(3/4)) = 1/(2 sqrt 2 pi^1.5)
    assert kappa_eps(0.0) == pytest.approx(1.0 / (2.0 * math.sqrt(2.0) * math.pi**1.5), rel=1e-14)
    with pytest.raises(DomainError):
        kappa_eps(-0.1)


def test_smooth_bump_plateau_and_support():
    r = np.array([0.0, 0.1, 0.25, 0.5, 0.7])
    v = smooth_bump(r)
    assert v[0] == v[1] == v[2] == 1.0
    assert v[3] == v[4] == 0.0
    mid = smooth_bump(np.linspace(0.26, 0.49, 50))
    assert np.all(np.diff(mid) < 0)


def test_cutoff_rejects_bad_radii():
    with pytest.raises(DomainError):
        build_cutoff(0.4, 0.3)


def test_u0_normalization_reproduces_kappa0(ks_01):
    u0 = ks_01.u0
    m, _ = integrate.quad(lambda t: math.sqrt(t) * u0(t), 0.0, u0.support_radius, limit=200, epsrel=1e-12)
    assert m == pytest.approx(kappa_eps(0.0), rel=1e-8)
    assert u0(u0.support_radius) == 0.0


def test_covariance_matches_direct_scale_integral(ks_01):
    # oracle: integrate the defining l-integral with adaptive quadrature
    for r in (0.05, 0.3, 0.8, 1.0, 2.5):
        lo = r / ks_01.u0.support_radius
        e = -2.0 * ks_01.phi - 1.0
        f = lambda l: l**e * ks_01.u(r / l)  # noqa: E731
        val = integrate.quad(f, 1.0, max(lo, 1.0), limit=400, epsabs=0, epsrel=1e-12)[0] if lo > 1 else 0.0
        val += integrate.quad(f, max(lo, 1.0), np.inf, limit=400, epsabs=0, epsrel=1e-12)[0]
        assert ks_01.C(r) == pytest.approx(val, rel=1e-9)


def test_covariance_continuous_at_one(ks_01):
    assert ks_01.C(1.0 - 1e-12) == pytest.approx(ks_01.C(1.0), rel=1e-9)


def test_C0_is_value_at_origin(ks_01):
    assert ks_01.C(0.0) == pytest.approx(ks_01.C0, rel=1e-12)


def test_gamma_is_difference_of_scales(ks_01):
    r = np.array([0.1, 0.4, 0.9, 1.5])
    # C(r) - L^(-2 phi) C(r/L) = Gamma(r)
    lhs = ks_01.C(r) - ks_01.L ** (-2 * ks_01.phi) * ks_01.C(r / ks_01.L)
    assert np.allclose(ks_01.Gamma(r), lhs, rtol=1e-9, atol=0)
    assert ks_01.Gamma(ks_01.L * 1.0) == 0.0


@pytest.mark.parametrize("eps", [0.05, 0.1])
@pytest.mark.parametrize("r", [0.3, 1.0, 3.0])
def test_riesz_identity(eps, r):
    assert riesz_check(r, build_kernels(2, eps)) < 1e-6


def test_w_fixed_point_identity(ks_01):
    rng = np.random.default_rng(1)
    r = rng.uniform(0.05, 3.0, 20)
    for p in (1, 2, 3):
        w = ks_01.w(r, p)
        rhs = ks_01.v(r, p) + ks_01.L ** (2 * p * ks_01.phi) * ks_01.w(ks_01.L * r, p)
        assert np.max(np.abs(w - rhs)) < 1e-8


def test_kernels_vw_validates_p(ks_01):
    v, w = kernels_vw(ks_01, 1)
    with pytest.raises(DomainError):
        v(0.5)
    assert np.isfinite(w(0.5))
    with pytest.raises(DomainError):
        kernels_vw(ks_01, 7)


def test_coefficients_positive_and_cached(ks_01):
    assert ks_01.a_coeff > 0 and ks_01.b_coeff > 0
    assert ks_01.a_coeff is ks_01.a_coeff or ks_01.a_coeff == ks_01.a_coeff


def test_small_eps_limit_of_a():
    for L in (2, 3):
        a = build_kernels(L, 1e-3).a_coeff
        assert a == pytest.approx(18 * math.log(L) / math.pi**2, rel=0.01)


def test_small_eps_limit_is_shape_independent():
    _, u0 = build_cutoff(0.2, 0.45)
    a_alt = build_kernels(2, 1e-3, u0).a_coeff
    a_def = build_kernels(2, 1e-3).a_coeff
    assert a_alt == pytest.approx(a_def, rel=0.01)


def test_wick_expectations_exact_by_gauss_hermite():
    # exact Gaussian expectations through a tensor Gauss-Hermite rule
    x, w = np.polynomial.hermite_e.hermegauss(30)
    w = w / w.sum()
    C0, Cxy = 1.3, 0.4
    L = np.linalg.cholesky([[C0, Cxy], [Cxy, C0]])
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    px = L[0, 0] * X
    py = L[1, 0] * X + L[1, 1] * Y
    for kind in WICK_KINDS:
        mean = np.sum(W * wick_eval(kind, px, py, C0, Cxy))
        assert abs(mean) < 1e-11, kind
    with pytest.raises(UsageError):
        wick_eval("phi6", 1.0)
