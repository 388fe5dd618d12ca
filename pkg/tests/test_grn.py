import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grnconv.errors import CaseError, DomainError
from grnconv.grn import (CaseTag, GrnParams, alpha_residual, beta_residual,
                         beta_threshold, i_term, solve_alpha, solve_beta,
                         solve_roots, z_eval, z_limit_v_to_infinity, z_oracle)
from grnconv.special_fns import integrate, normal_pdf, NormalParams, npdf, phi

# Z_{1/3, 1/2}(0) from the envelope oracle on a 400-point grid, frozen
Z_THIRD_HALF_ZERO = 0.2338394810


def test_params_validation():
    with pytest.raises(DomainError):
        GrnParams(-1.0, 0.0)
    with pytest.raises(DomainError):
        GrnParams(math.inf, 0.0)
    with pytest.raises(DomainError):
        GrnParams(1.0, -math.inf)


def test_solve_beta_examples():
    b = solve_beta(0.5, 0.5, 1.0)
    assert abs(beta_residual(0.5, 0.5, 1.0, b)) <= 1e-10
    assert b < 1.0
    b = solve_beta(1.0, 1.0, 2.0)
    assert abs(beta_residual(1.0, 1.0, 2.0, b)) <= 1e-10 and b < 2.0
    a = solve_alpha(0.0, 4.0)
    assert beta_threshold(0.0, 4.0, a) < 5.0
    assert solve_beta(0.0, 4.0, 5.0) > a


def test_solve_beta_case_errors():
    with pytest.raises(CaseError):
        solve_beta(-1.0, 1.0, 0.5)
    with pytest.raises(CaseError):
        solve_beta(0.0, 4.0, -3.0)  # below the v > 1 threshold


def test_solve_alpha_examples():
    for mu, v in [(0.0, 4.0), (1.0, 2.0), (-3.0, 10.0)]:
        a = solve_alpha(mu, v)
        assert abs(alpha_residual(mu, v, a)) <= 1e-10
        tau = beta_threshold(mu, v, a)
        assert math.isfinite(tau) and tau >= a
    with pytest.raises(CaseError):
        solve_alpha(0.0, 1.0)
    with pytest.raises(CaseError):
        solve_alpha(0.0, 0.5)


def test_i_term_examples():
    assert i_term(0.0, 1.0, math.inf) == pytest.approx(1.0, abs=1e-15)
    assert i_term(2.0, 1.0, math.inf) == pytest.approx(math.exp(-0.5), abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(0.05, 8), st.floats(-4, 4))
def test_i_term_matches_quadrature(mu, v, x):
    p = NormalParams(mu, v)
    lo = min(-40.0, mu - 40 * p.sd)
    val = integrate(lambda t: math.sqrt(npdf(t) * normal_pdf(p, t)), lo, x, tol=1e-12)
    assert i_term(mu, v, x) == pytest.approx(val, abs=1e-8)


def test_z_eval_examples():
    assert z_eval(GrnParams(1.0, 0.5), -1.0) == pytest.approx(0.0668072012688581, abs=1e-15)
    assert z_eval(GrnParams(0.0, 0.5), 0.0) == 0.5
    assert z_eval(GrnParams(0.0, 0.5), 0.5) == pytest.approx(phi(0.5))  # left-continuous at s
    assert z_eval(GrnParams(0.0, 0.5), 0.6) == 1.0
    z = z_eval(GrnParams(1 / 3, 0.5), 0.0)
    assert 0.0 < z < 1.0
    assert z == pytest.approx(Z_THIRD_HALF_ZERO, abs=1e-8)


def test_rayleigh_normal_unit_variance_closed_form():
    # Z_{1,inf}(mu) = 1 - exp(-mu**2 / 4) for mu > 0
    for mu in (0.3, 1.0, 2.0, 4.0):
        assert z_eval(GrnParams(1.0), mu) == pytest.approx(1 - math.exp(-mu * mu / 4), abs=1e-14)
    assert z_eval(GrnParams(1.0), -1.0) == 0.0


def test_z_oracle_examples():
    p = GrnParams(1 / 3, 0.5)
    assert abs(z_oracle(p, 0.0, grid=400) - z_eval(p, 0.0)) <= 1e-4
    p = GrnParams(1.0, 0.5)
    assert z_oracle(p, -1.0) == pytest.approx(phi(-1.5), abs=1e-6)
    far = z_oracle(GrnParams(1 / 3, 50.0), 0.5)
    assert far == pytest.approx(z_eval(GrnParams(1 / 3, math.inf), 0.5), abs=1e-4)


@pytest.mark.parametrize("v,s,mu", [(0.2, 0.0, 0.5), (0.5, -1.0, -1.0), (1.0, 1.0, 1.5),
                                    (2.0, 0.0, 0.0), (5.0, 2.0, 1.0), (3.0, -0.5, 2.0)])
def test_oracle_dominance(v, s, mu):
    p = GrnParams(v, s)
    assert z_oracle(p, mu) >= z_eval(p, mu) - 1e-4


def test_z_limit_v_to_infinity():
    assert z_limit_v_to_infinity(-1.0, 0.0) == pytest.approx(0.8413447460685429)
    assert z_limit_v_to_infinity(0.5, 0.0) == 0.5
    v = 1e6
    sd = math.sqrt(v)
    assert z_eval(GrnParams(v, sd * 0.5), 0.0) == pytest.approx(0.5, abs=2e-2)


def test_case_tags_and_root_invariants():
    r = solve_roots(GrnParams(0.5, 1.0), 0.3)
    assert r.case_tag is CaseTag.V_LT_1 and r.beta < min(1.0, 0.3 / 0.5)
    r = solve_roots(GrnParams(1.0, 1.0), 0.5)
    assert r.case_tag is CaseTag.V_EQ_1_MU_GT_0 and r.beta < 1.0
    r = solve_roots(GrnParams(1.0, 1.0), -0.5)
    assert r.case_tag is CaseTag.V_EQ_1_MU_LE_0 and r.alpha is None and r.beta is None
    r = solve_roots(GrnParams(4.0, 5.0), 0.0)
    assert r.case_tag is CaseTag.V_GT_1_LARGE_S and r.beta > r.alpha
    r = solve_roots(GrnParams(4.0, -3.0), 0.0)
    assert r.case_tag is CaseTag.V_GT_1_SMALL_S and r.beta is None


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([0.1, 0.5, 0.9, 1.0, 1.5, 4.0]), st.floats(-3, 3), st.floats(-4, 4))
def test_beta_below_s(v, s, mu):
    r = solve_roots(GrnParams(v, s), mu)
    if r.beta is not None:
        assert r.beta < s
        if v < 1:
            assert r.beta < mu / (1 - v)


@pytest.mark.parametrize("v", [1 / 3, 1.0, 3.0])
@pytest.mark.parametrize("s", [-0.5, 0.5, 2.0, math.inf])
def test_cdf_property(v, s):
    w = 10 * max(1.0, math.sqrt(v))
    z = np.array([z_eval(GrnParams(v, s), mu) for mu in np.linspace(-w, w, 200)])
    assert np.all(np.diff(z) >= -1e-12)
    assert z[0] <= 1e-6 and z[-1] >= 1 - 1e-3


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([0.2, 1 / 3, 1.0, 2.0, 3.0]), st.floats(-3, 3), st.floats(0.01, 4),
       st.floats(-4, 4))
def test_monotone_in_s(v, s, ds, mu):
    lo = z_eval(GrnParams(v, s), mu)
    hi = z_eval(GrnParams(v, s + ds), mu)
    assert lo >= hi - 1e-10


@pytest.mark.parametrize("v", [1 / 3, 1.0, 3.0])
def test_rayleigh_normal_limit(v):
    for mu in np.linspace(-3, 3, 13):
        d = z_eval(GrnParams(v, 50.0), mu) - z_eval(GrnParams(v, math.inf), mu)
        assert 0.0 <= d <= 1e-6


@pytest.mark.parametrize("s", [-0.5, 0.5, 1.0])
def test_small_v_limit(s):
    for mu in np.linspace(-3, 3, 61):
        z = z_eval(GrnParams(1e-4, s), mu)
        if mu < s - 0.2:
            assert abs(z - phi(mu)) <= 2e-2
        elif mu > s + 0.2:
            assert abs(z - 1.0) <= 2e-2


@pytest.mark.parametrize("s", [-1.0, -0.5, 0.5, 1.0])
def test_large_v_limit(s):
    v = 1e6
    sd = math.sqrt(v)
    for mu in np.linspace(-3, 3, 13):
        assert abs(z_eval(GrnParams(v, sd * s), sd * mu) - z_limit_v_to_infinity(s, mu)) <= 2e-2


@pytest.mark.parametrize("s", [0.5, math.inf])
@pytest.mark.parametrize("mu", [-1.0, 0.5, 2.0])
def test_continuity_across_unit_variance(s, mu):
    mid = z_eval(GrnParams(1.0, s), mu)
    for v in (1 - 1e-6, 1 + 1e-6):
        assert z_eval(GrnParams(v, s), mu) == pytest.approx(mid, abs=1e-6)


@settings(max_examples=80, deadline=None)
@given(st.floats(1e-6, 1e6), st.one_of(st.floats(-40, 40), st.just(math.inf)),
       st.floats(-60, 60))
def test_z_eval_total(v, s, mu):
    z = z_eval(GrnParams(v, s), mu)
    assert 0.0 <= z <= 1.0
