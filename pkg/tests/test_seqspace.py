import numpy as np
import pytest

from crossover.errors import DomainError, PreconditionError, UsageError
from crossover.flow import FlowParams, build_gbar
from crossover.models.base import RgModel, null_model
from crossover.models.toy import poly_toy_model
from crossover.seqspace import (
    DeviationSequence,
    NormWeights,
    SolverConfig,
    apply_m,
    apply_m_composed,
    beta_limit,
    calibrated_R_norm,
    quadruple_norm,
    solve_orbit,
)


@pytest.fixture(scope="module")
def toy_setup(fp_01):
    model = poly_toy_model(fp_01, audit_samples=200)
    return fp_01, model


def random_seq(gs, nw, model, rng, scale=0.01):
    gb = gs.values
    n = len(gb)
    dg = scale * gb ** nw.e(gs.ns) * rng.uniform(-1, 1, n)
    dg[gs.n_minus] = 0.0
    mu = scale * gb**nw.mu_exp * rng.uniform(-1, 1, n)
    R = rng.normal(size=(n, model.dim))
    R *= (scale * gb**nw.R_exp / model.R_norm(R, gb, nw))[:, None]
    return DeviationSequence(gs.n_minus, gs.n_plus, dg, mu, R)


def test_streaming_equals_composed(toy_setup):
    fp, model = toy_setup
    nw = model.nw
    gs = build_gbar(0.3, 25, fp)
    ds = random_seq(gs, nw, model, np.random.default_rng(0))
    a, _ = apply_m(ds, gs, fp, nw, model)
    b = apply_m_composed(ds, gs, fp, nw, model)
    assert quadruple_norm(a - b, gs, nw, model) < 1e-12


def test_image_has_zero_centre(toy_setup):
    fp, model = toy_setup
    gs = build_gbar(0.3, 25, fp)
    ds = random_seq(gs, model.nw, model, np.random.default_rng(1))
    img, tails = apply_m(ds, gs, fp, model.nw, model)
    assert img.delta_g[gs.n_minus] == 0.0
    assert set(tails) == {"mu", "R"}


def test_norm_of_examples():
    fp = FlowParams(2, 0.1, 1.0)
    nw = NormWeights.for_flow(fp)
    gs = build_gbar(0.3, 5, fp)
    model = null_model(fp)
    gb = gs.values
    ds = DeviationSequence(5, 5, 0.1 * gb ** nw.e(gs.ns), np.zeros(11), np.zeros((11, 3)))
    assert quadruple_norm(ds, gs, nw, model) == pytest.approx(0.1, rel=1e-12)
    ds = DeviationSequence(5, 5, np.zeros(11), 0.2 * gb**nw.mu_exp, np.zeros((11, 3)))
    assert quadruple_norm(ds, gs, nw, model) == pytest.approx(0.2, rel=1e-12)


def test_calibrated_norm_formula():
    nw = NormWeights(c_norm=1.0, h_star=2.0)
    R = np.array([[1.0, -1.0, 0.5]])
    flat = 1 + 2 + 0.5 * 4
    gb = 1e-4
    h = gb**-0.25
    large = gb**2 * (1 + h + 0.5 * h * h)
    assert calibrated_R_norm(R, np.array([gb]), nw)[0] == pytest.approx(max(flat, large))
    with pytest.raises(DomainError):
        calibrated_R_norm(R, np.array([0.0]), nw)


def test_norm_comparison_property():
    rng = np.random.default_rng(7)
    for L, eps in [(2, 0.1), (3, 0.05), (2, 0.3)]:
        fp = FlowParams(L, eps, 1.0)
        if max(fp.Le**2, (2 - fp.Le) ** -0.25) > 1.5:
            continue
        nw = NormWeights.for_flow(fp)
        gb = fp.gbar_star * rng.uniform(0, 1, 1000)
        R = rng.normal(size=(1000, 6))
        fg = fp.Le * gb - fp.c * gb * gb
        assert np.all(calibrated_R_norm(R, fg, nw) <= 1.5 * calibrated_R_norm(R, gb, nw))


class _ConstMu(RgModel):
    """Only the mass remainder is nonzero: xi_mu = const * gbar_star^2."""

    name = "const-mu"

    def __init__(self, fp, k):
        super().__init__(fp)
        self.k = k
        self.B_mu = 1.0

    def xi_g(self, g, mu, R):
        return np.zeros_like(g)

    def xi_mu(self, g, mu, R):
        return np.full_like(g, self.k)

    def xi_R(self, g, mu, R):
        return np.zeros_like(R)

    def L_diag(self, g, mu):
        return np.full((len(g), self.dim), 0.25)


def test_constant_mass_source_gives_full_geometric_sum():
    fp = FlowParams(2, 0.1, 1.0)
    nw = NormWeights.for_flow(fp)
    model = _ConstMu(fp, 1e-9)
    gs = build_gbar(0.3, 10, fp)
    img, _ = apply_m(DeviationSequence.zeros(gs.window, 3), gs, fp, nw, model, check_domain=False)
    lam = fp.mu_rate
    # mu_n = -sum_{p >= n} lam^(p-n+1) k, summed to infinity
    assert np.allclose(img.mu, -1e-9 * lam / (1 - lam), rtol=1e-13)


def test_domain_error_names_index():
    fp = FlowParams(2, 0.1, 1.0)
    nw = NormWeights.for_flow(fp)
    model = null_model(fp)
    gs = build_gbar(0.3, 5, fp)
    ds = DeviationSequence.zeros(gs.window, 3)
    ds.delta_g[7] = gs.values[7]
    with pytest.raises(DomainError) as exc:
        apply_m(ds, gs, fp, nw, model)
    assert exc.value.diagnostics["n"] == 2


def test_window_mismatch():
    fp = FlowParams(2, 0.1, 1.0)
    nw = NormWeights.for_flow(fp)
    gs = build_gbar(0.3, 5, fp)
    with pytest.raises(UsageError):
        quadruple_norm(DeviationSequence.zeros((4, 5), 3), gs, nw, null_model(fp))


def test_solver_config_enforces_ball():
    with pytest.raises(PreconditionError):
        SolverConfig(beta=beta_limit(0.3) * 1.01, omega0=0.3)
    assert SolverConfig.for_omega0(0.3).beta == pytest.approx(0.5 * beta_limit(0.3))


def test_null_orbit_exact():
    fp = FlowParams(2, 0.1, 1.0)
    res = solve_orbit(null_model(fp), 0.3, window=50)
    assert res.report.iterations == 1
    assert np.all(res.deviation.delta_g == 0) and np.all(res.deviation.mu == 0) and np.all(res.deviation.R == 0)
    assert np.array_equal(res.g, res.gbar.values)
