import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossover.errors import DomainError
from crossover.flow import FlowParams, build_gbar, default_window, f_inverse, f_map, f_prime, step_bounds


def test_params_derived_quantities():
    fp = FlowParams(2, 0.1, 0.5)
    Le = 2**0.1
    assert fp.c == pytest.approx(Le**2 * 0.5, rel=1e-15)
    assert fp.gbar_star == pytest.approx((Le - 1) / (Le**2 * 0.5), rel=1e-15)
    assert f_map(fp.gbar_star, fp) == pytest.approx(fp.gbar_star, rel=1e-14)
    assert fp.slope == pytest.approx(math.log(2) / 0.5)


@pytest.mark.parametrize("kw", [dict(L=1, eps=0.1, a=1.0), dict(L=2, eps=1.0, a=1.0), dict(L=2, eps=0.1, a=-1.0)])
def test_params_reject_bad_input(kw):
    with pytest.raises(DomainError):
        FlowParams(**kw)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 1.0))
def test_inverse_round_trip(t):
    fp = FlowParams(3, 0.05, 0.8)
    y = t * fp.gbar_star
    x = f_inverse(y, fp)
    assert f_map(x, fp) == pytest.approx(y, rel=1e-13, abs=1e-300)
    assert f_prime(x, fp) > 0


def test_domain_checked():
    fp = FlowParams(2, 0.1, 1.0)
    with pytest.raises(DomainError):
        f_map(-1e-3, fp)
    with pytest.raises(DomainError):
        build_gbar(1.2, 10, fp)


def test_orbit_satisfies_recursion_and_is_increasing():
    fp = FlowParams(2, 0.1, 1.0)
    gs = build_gbar(0.3, (50, 60), fp)
    v = gs.values
    assert gs.at(0) == 0.3 * fp.gbar_star
    assert np.allclose(v[1:], fp.Le * v[:-1] - fp.c * v[:-1] ** 2, rtol=1e-13, atol=0)
    assert np.all(np.diff(v) > 0)
    with pytest.raises(DomainError):
        gs.at(61)


@pytest.mark.parametrize("L", [2, 3])
@pytest.mark.parametrize("eps", [0.02, 0.05, 0.1])
@pytest.mark.parametrize("w0", [0.1, 0.3, 0.49])
def test_sandwich(L, eps, w0):
    fp = FlowParams(L, eps, 1.0)
    gs = build_gbar(w0, 200, fp)
    for n, g in zip(gs.ns, gs.values):
        lo, hi = step_bounds(int(n), gs)
        assert lo - 1e-12 * fp.gbar_star <= g <= hi + 1e-12 * fp.gbar_star


def test_default_window_rule():
    fp = FlowParams(2, 0.1, 1.0)
    assert default_window(fp) == math.ceil(40 / (0.1 * math.log(2)))
