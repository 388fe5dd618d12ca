import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grnconv.asymptotics import (RateClass, RatePair1, RatePair2, Relation,
                                 SourceTargetProfile, classify_rate1,
                                 classify_rate2, compression_min_storage,
                                 entropy_moments, expansion_L, fidelity_branch,
                                 profile, ratio_curve, region1_contains,
                                 region2_contains, second_order_fidelity,
                                 second_order_fidelity_inverse,
                                 second_order_threshold, simulate_or_better_2nd)
from grnconv.errors import DomainError, RangeError, RateError, UniformError
from grnconv.grn import GrnParams, z_eval
from grnconv.majorization import Distribution, iid_power, max_convertible_number
from grnconv.special_fns import phi, phi_inv

D = Distribution.from_probs
P = D([0.75, 0.25])
Q = D([0.6, 0.4])
PQ = profile(P, Q)
PP = profile(P, P)

# entropy and varentropy of (0.75, 0.25) in bits, mpmath at 30 digits
H_BIN = 0.8112781244591328
V_BIN = 0.4710198991297989


def test_entropy_moments():
    H, V = entropy_moments(P)
    assert H == pytest.approx(H_BIN, abs=1e-15)
    assert V == pytest.approx(V_BIN, abs=1e-15)
    assert entropy_moments(Distribution.uniform(4)) == (pytest.approx(2.0), 0.0)


def test_profile_constants():
    assert PP.C_pq == pytest.approx(1.0, abs=1e-15)
    assert PP.D_pq == pytest.approx(H_BIN / math.sqrt(V_BIN))
    u = profile(Distribution.uniform(4), Q)
    assert u.p_uniform and not u.q_uniform and u.C_pq == math.inf
    with pytest.raises(DomainError):
        SourceTargetProfile.from_moments(1.0, -0.1, 1.0, 0.1)


# -- first order -----------------------------------------------------------

def test_region1_examples():
    H_p, H_q = PQ.H_p, PQ.H_q
    assert region1_contains(PQ, RatePair1(H_p, H_p / H_q))
    assert not region1_contains(PQ, RatePair1(H_p / 2, H_p / H_q))
    assert region1_contains(PQ, RatePair1(5.0, H_p / H_q))
    with pytest.raises(DomainError):
        RatePair1(0.0, 1.0)


def test_classify_rate1_examples():
    H_p, H_q = PQ.H_p, PQ.H_q
    assert classify_rate1(PQ, RatePair1(H_p, H_p / H_q)) is RateClass.ADMISSIBLE
    assert classify_rate1(PQ, RatePair1(H_p / 2, H_p / (2 * H_q))) is RateClass.SEMI_ADMISSIBLE
    assert classify_rate1(PQ, RatePair1(2 * H_p, H_p / H_q)) is RateClass.INTERIOR
    assert classify_rate1(PQ, RatePair1(H_p, 0.5 * H_p / H_q)) is RateClass.INTERIOR
    assert classify_rate1(PQ, RatePair1(H_p, 1.1 * H_p / H_q)) is RateClass.OUTSIDE


# -- second-order fidelity -------------------------------------------------

def test_branches():
    assert fidelity_branch(PQ, PQ.H_p) == "rayleigh-normal"
    assert fidelity_branch(PQ, 0.5) == "non-admissible"
    assert fidelity_branch(profile(Distribution.uniform(4), Q), 2.0) == "uniform-source"
    assert fidelity_branch(profile(P, Distribution.uniform(2)), PQ.H_p) == "uniform-target"
    with pytest.raises(RateError):
        fidelity_branch(PQ, 2.0)
    with pytest.raises(RateError):
        fidelity_branch(PQ, 0.0)
    both = profile(Distribution.uniform(2), Distribution.uniform(4))
    with pytest.raises(UniformError):
        second_order_fidelity(both, 1.0, 0.0, 0.0)


def test_non_admissible_fidelity():
    t2 = 0.4
    assert second_order_fidelity(PQ, 0.5, PQ.H_q * t2, t2) == pytest.approx(math.sqrt(0.5))
    s1, s2 = 0.5, 0.3
    expected = math.sqrt(phi(math.sqrt(PQ.H_q / (PQ.V_q * s1)) * (s2 - PQ.H_q * t2)))
    assert second_order_fidelity(PQ, s1, s2, t2) == pytest.approx(expected, abs=1e-15)


def test_uniform_target_fidelity():
    l = 4
    prof = profile(P, Distribution.uniform(l))
    assert second_order_fidelity(prof, prof.H_p, 0.5, 0.3) == 0.0
    t2 = -0.2
    expected = math.sqrt(phi(-math.log2(l) * t2 / math.sqrt(prof.V_p)))
    assert second_order_fidelity(prof, prof.H_p, 0.0, t2) == pytest.approx(expected)


def test_equal_pair_fidelity_at_zero():
    for s2 in (-1.0, 0.0, 0.7):
        expected = math.sqrt(phi(s2 / math.sqrt(PP.V_p)))
        assert second_order_fidelity(PP, PP.H_p, s2, 0.0) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("t2", [-3.0, -1.0, 0.0, 0.5, 2.0])
def test_unlimited_storage_recovers_rayleigh_normal(t2):
    plain = math.sqrt(1 - z_eval(GrnParams(PQ.C_pq), t2 * PQ.D_pq))
    assert second_order_fidelity(PQ, PQ.H_p, 50.0, t2) == pytest.approx(plain, abs=1e-4)
    assert second_order_fidelity(PQ, PQ.H_p, math.inf, t2) == pytest.approx(plain, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 2), st.floats(-3, 3))
def test_fidelity_monotone_in_storage(s2, ds, t2):
    for prof, s1 in ((PQ, PQ.H_p), (PQ, 0.6), (PP, PP.H_p)):
        lo = second_order_fidelity(prof, s1, s2, t2)
        hi = second_order_fidelity(prof, s1, s2 + ds, t2)
        assert hi >= lo - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 2))
def test_fidelity_non_increasing_in_copies(s2, t2, dt):
    a = second_order_fidelity(PQ, PQ.H_p, s2, t2)
    b = second_order_fidelity(PQ, PQ.H_p, s2, t2 + dt)
    assert b <= a + 1e-12


# -- inverse and regions ---------------------------------------------------

def test_inverse_examples():
    nu, s1, s2 = 0.9, 0.5, 0.2
    expected = s2 / PQ.H_q - math.sqrt(PQ.V_q * s1 / PQ.H_q ** 3) * phi_inv(nu * nu)
    assert second_order_fidelity_inverse(PQ, s1, s2, nu) == pytest.approx(expected, abs=1e-9)
    s2 = math.sqrt(PP.V_p) * phi_inv(0.81)
    assert second_order_fidelity_inverse(PP, PP.H_p, s2, 0.9) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(RangeError):
        second_order_fidelity_inverse(PQ, PQ.H_p, 0.0, 1.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(0.05, 0.95))
def test_inverse_round_trip(s2, nu):
    t2 = second_order_fidelity_inverse(PQ, PQ.H_p, s2, nu)
    assert second_order_fidelity(PQ, PQ.H_p, s2, t2) == pytest.approx(nu, abs=1e-9)


def test_region2_boundary():
    t2 = second_order_fidelity_inverse(PQ, PQ.H_p, 0.5, 0.8)
    assert region2_contains(PQ, PQ.H_p, 0.8, RatePair2(0.5, t2))
    assert not region2_contains(PQ, PQ.H_p, 0.8, RatePair2(0.5, t2 + 1e-6))


@pytest.mark.parametrize("s2", [-1.0, 0.0, 0.3, 2.0])
def test_uniform_target_region(s2):
    l, nu = 4, 0.85
    prof = profile(P, Distribution.uniform(l))
    bound = min(s2, -math.sqrt(prof.V_p) * phi_inv(nu * nu)) / math.log2(l)
    assert second_order_fidelity_inverse(prof, prof.H_p, s2, nu) == pytest.approx(bound, abs=1e-9)


@pytest.mark.parametrize("s2", [-1.0, 0.0, 0.8])
def test_uniform_source_region(s2):
    l, nu = 4, 0.85
    prof = profile(Distribution.uniform(l), Q)
    bound = (min(s2, 0.0) / prof.H_q
             - math.sqrt(prof.V_q * math.log2(l) / prof.H_q ** 3) * phi_inv(nu * nu))
    assert second_order_fidelity_inverse(prof, prof.H_p, s2, nu) == pytest.approx(bound, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(0.1, 0.8), st.floats(0.01, 0.19))
def test_region_nesting(s2, nu, dnu):
    strict = second_order_fidelity_inverse(PQ, PQ.H_p, s2, nu + dnu)
    loose = second_order_fidelity_inverse(PQ, PQ.H_p, s2, nu)
    assert strict <= loose + 1e-12


@pytest.mark.parametrize("s2,t2", [(-1.0, -2.0), (1.0, -1.0), (0.5, 0.3), (-0.5, -1.0)])
def test_uniform_source_is_limit_of_mixtures(s2, t2):
    l = 4
    q = D([0.6, 0.4])
    limit = profile(Distribution.uniform(l), q)
    ref = second_order_fidelity(limit, limit.H_p, s2, t2)
    r = np.array([0.4, 0.3, 0.2, 0.1])
    gaps = []
    for eps in (1e-2, 1e-3):
        prof = profile(D((1 - eps) / l + eps * r), q)
        gaps.append(abs(second_order_fidelity(prof, prof.H_p, s2, t2) - ref))
    assert gaps[1] < gaps[0] and gaps[1] < 1e-2


# -- expansions and classification ----------------------------------------

def test_expansion_examples():
    s2 = second_order_threshold(PP, 0.9)
    assert expansion_L(PP, PP.H_p, s2, 0.9, 400) == pytest.approx(400.0, abs=1e-6)
    n = 900
    expected = 0.5 / PQ.H_q * n + second_order_fidelity_inverse(PQ, 0.5, 0.0, 0.9) * 30
    assert expansion_L(PQ, 0.5, 0.0, 0.9, n) == pytest.approx(expected)
    with pytest.raises(DomainError):
        expansion_L(PQ, PQ.H_p, 0.0, 0.9, 0)


@pytest.mark.parametrize("s2", [-1.0, 0.0, 1.0])
def test_expansion_tracks_exact_counts(s2):
    nu, gaps = 0.9, []
    for n in (256, 1024, 4096):
        predicted = expansion_L(PQ, PQ.H_p, s2, nu, n)
        exact = max_convertible_number(iid_power(P, n), Q, nu,
                                       n_bits=PQ.H_p * n + s2 * math.sqrt(n))
        gaps.append(abs(exact - predicted) / math.sqrt(n))
    assert gaps[0] > gaps[1] > gaps[2]


def test_simulate_or_better():
    a = RatePair2(0.0, 0.0)
    assert simulate_or_better_2nd(1.2, a, a) is Relation.BETTER
    assert simulate_or_better_2nd(1.2, a, RatePair2(-1.0, -1.2)) is Relation.SIMULATES
    assert simulate_or_better_2nd(1.2, a, RatePair2(0.5, 1.0)) is Relation.NEITHER
    assert simulate_or_better_2nd(1.2, a, RatePair2(0.5, -0.5)) is Relation.BETTER
    with pytest.raises(DomainError):
        simulate_or_better_2nd(0.0, a, a)


def _on_boundary(prof, s1, s2, nu):
    return RatePair2(s2, second_order_fidelity_inverse(prof, s1, s2, nu))


def test_classify_rate2_non_admissible():
    for s2 in (-1.0, 0.0, 1.5):
        r = _on_boundary(PQ, 0.5, s2, 0.9)
        assert classify_rate2(PQ, 0.5, 0.9, r) is RateClass.SEMI_ADMISSIBLE


def test_classify_rate2_equal_pair():
    nu = 0.9
    knee = second_order_threshold(PP, nu)
    for s2 in (knee - 1.0, knee - 0.3):
        assert classify_rate2(PP, PP.H_p, nu, _on_boundary(PP, PP.H_p, s2, nu)) \
            is RateClass.SEMI_ADMISSIBLE
    for s2 in (knee + 0.3, knee + 1.0):
        assert classify_rate2(PP, PP.H_p, nu, _on_boundary(PP, PP.H_p, s2, nu)) \
            is RateClass.ADMISSIBLE


def test_classify_rate2_uniform_source():
    nu = 0.9
    prof = profile(Distribution.uniform(4), Q)
    corner = _on_boundary(prof, prof.H_p, 0.0, nu)
    expected = -math.sqrt(prof.V_q * 2.0 / prof.H_q ** 3) * phi_inv(nu * nu)
    assert corner.t2 == pytest.approx(expected, abs=1e-9)
    assert classify_rate2(prof, prof.H_p, nu, corner) is RateClass.ADMISSIBLE
    left = _on_boundary(prof, prof.H_p, -1.0, nu)
    assert classify_rate2(prof, prof.H_p, nu, left) is RateClass.SEMI_ADMISSIBLE
    right = _on_boundary(prof, prof.H_p, 1.0, nu)
    assert classify_rate2(prof, prof.H_p, nu, right) is RateClass.INTERIOR


def test_classify_rate2_off_boundary():
    r = _on_boundary(PQ, PQ.H_p, 0.0, 0.9)
    assert classify_rate2(PQ, PQ.H_p, 0.9, RatePair2(0.0, r.t2 + 0.1)) is RateClass.OUTSIDE
    assert classify_rate2(PQ, PQ.H_p, 0.9, RatePair2(0.0, r.t2 - 0.1)) is RateClass.INTERIOR
    assert classify_rate2(PQ, PQ.H_p, 0.9, r) is RateClass.ADMISSIBLE


# -- compression and ratios ------------------------------------------------

def test_compression_examples():
    n = 10_000
    assert compression_min_storage(P, math.sqrt(0.5), n) == pytest.approx(H_BIN * n, abs=1e-9)
    extra = compression_min_storage(P, 0.95, n) - H_BIN * n
    assert extra == pytest.approx(math.sqrt(V_BIN) * phi_inv(0.9025) * 100, abs=1e-9)
    assert extra > 0
    s2 = second_order_threshold(PP, 0.95)
    assert second_order_fidelity(PP, PP.H_p, s2, 0.0) == pytest.approx(0.95, abs=1e-12)
    with pytest.raises(UniformError):
        compression_min_storage(Distribution.uniform(2), 0.9, n)
    with pytest.raises(RangeError):
        compression_min_storage(P, 1.0, n)


def test_ratio_examples():
    t2s = np.linspace(-6, 3, 37)
    far = ratio_curve(PQ, 50.0, t2s)
    assert all(abs(r - 1.0) <= 1e-4 for r in far if r is not None)
    for s2 in (-2.0, 0.0, 1.0):
        assert all(r <= 1 + 1e-10 for r in ratio_curve(PQ, s2, t2s) if r is not None)
    prof = profile(P, Distribution.uniform(2))
    with pytest.raises(UniformError):
        ratio_curve(prof, 0.0, [0.0])


def test_ratio_marks_zero_denominators():
    out = ratio_curve(PQ, 0.0, [0.0, 60.0])
    assert out[0] is not None and out[1] is None


def test_ratio_for_equal_pair():
    # with C = 1 and t2 <= 0 the ratio is sqrt(Phi(s2/sqrt(V) - t2 D))
    for s2 in (-1.0, 0.0, 1.0):
        for t2, r in zip((0.0, -1.0, -3.0), ratio_curve(PP, s2, [0.0, -1.0, -3.0])):
            assert r == pytest.approx(math.sqrt(phi(s2 / math.sqrt(PP.V_p) - t2 * PP.D_pq)),
                                      abs=1e-12)
