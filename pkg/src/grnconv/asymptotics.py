"""First- and second-order rate regions for conversion via restricted storage.

A storage of ``s1*n + s2*sqrt(n)`` bits and ``t1*n + t2*sqrt(n)`` target
copies are the rate coordinates.  All logarithms are base 2, so entropies are
in bits and varentropies in bits squared.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import DomainError, RangeError, RateError, UniformError
from .grn import GrnParams, z_eval
from .majorization import Distribution
from .special_fns import phi, phi_inv

ADMISSIBLE_REL_TOL = 1e-9
RATE_TOL = 1e-12
INVERSE_T_TOL = 1e-13
LN2 = math.log(2.0)


@dataclass(frozen=True)
class SourceTargetProfile:
    """Entropies, varentropies and the two shape constants of a (P, Q) pair."""

    H_p: float
    V_p: float
    H_q: float
    V_q: float
    C_pq: float
    D_pq: float
    p_uniform: bool
    q_uniform: bool

    @classmethod
    def from_moments(cls, H_p: float, V_p: float, H_q: float, V_q: float) -> "SourceTargetProfile":
        """Profile from entropies and varentropies; zero varentropy means uniform."""
        if min(H_p, V_p, H_q, V_q) < 0:
            raise DomainError("entropies and varentropies must be non-negative")
        p_uni, q_uni = V_p == 0, V_q == 0
        if not p_uni and not q_uni:
            C = (H_p / V_p) / (H_q / V_q) if H_q > 0 else math.inf
        else:
            C = math.inf if p_uni else 0.0
        D = H_q / math.sqrt(V_p) if not p_uni else math.inf
        return cls(H_p, V_p, H_q, V_q, C, D, p_uni, q_uni)


@dataclass(frozen=True)
class RatePair1:
    s1: float
    t1: float

    def __post_init__(self):
        if not (self.s1 > 0 and self.t1 > 0):
            raise DomainError("first-order rates must be positive")


@dataclass(frozen=True)
class RatePair2:
    s2: float
    t2: float


class RateClass(enum.Enum):
    INTERIOR = "interior"
    SEMI_ADMISSIBLE = "semi-admissible"
    ADMISSIBLE = "admissible"
    OUTSIDE = "outside"
    UNRESOLVED = "unresolved"


class Relation(enum.Enum):
    BETTER = "better"
    SIMULATES = "simulates"
    NEITHER = "neither"


def entropy_moments(p: Distribution) -> tuple:
    """Shannon entropy and varentropy of ``p`` in bits."""
    terms = [(math.exp(lp) * m, -lp / LN2) for lp, m in zip(p.log_probs, p.mults)]
    H = math.fsum(w * x for w, x in terms)
    if p.is_uniform:
        return H, 0.0
    V = math.fsum(w * (x - H) ** 2 for w, x in terms)
    return H, V


def profile(p: Distribution, q: Distribution) -> SourceTargetProfile:
    H_p, V_p = entropy_moments(p)
    H_q, V_q = entropy_moments(q)
    return SourceTargetProfile.from_moments(H_p, V_p, H_q, V_q)


# ---------------------------------------------------------------------------
# first order
# ---------------------------------------------------------------------------

def _need_target_entropy(prof: SourceTargetProfile) -> None:
    if not prof.H_q > 0:
        raise DomainError("the target must have positive entropy")


def region1_contains(prof: SourceTargetProfile, r: RatePair1) -> bool:
    """Whether ``(s1, t1)`` is achievable: ``t1 <= min(H_p, s1) / H_q``."""
    _need_target_entropy(prof)
    bound = min(prof.H_p, r.s1) / prof.H_q
    return r.s1 > 0 and 0 < r.t1 <= bound * (1 + RATE_TOL)


def classify_rate1(prof: SourceTargetProfile, r: RatePair1) -> RateClass:
    if not region1_contains(prof, r):
        return RateClass.OUTSIDE
    on_line = abs(r.t1 - r.s1 / prof.H_q) <= RATE_TOL * max(1.0, r.t1)
    if on_line and r.s1 <= prof.H_p * (1 + RATE_TOL):
        if abs(r.s1 - prof.H_p) <= RATE_TOL * max(1.0, prof.H_p):
            return RateClass.ADMISSIBLE
        return RateClass.SEMI_ADMISSIBLE
    return RateClass.INTERIOR


# ---------------------------------------------------------------------------
# second order
# ---------------------------------------------------------------------------

def is_admissible_s1(prof: SourceTargetProfile, s1: float) -> bool:
    """True when ``s1`` selects the admissible corner ``s1 = H_p``."""
    return abs(s1 - prof.H_p) <= ADMISSIBLE_REL_TOL * prof.H_p


def _check_s1(prof: SourceTargetProfile, s1: float) -> None:
    _need_target_entropy(prof)
    if not s1 > 0:
        raise RateError(f"s1 must be positive, got {s1}")
    if s1 > prof.H_p and not is_admissible_s1(prof, s1):
        raise RateError(f"s1={s1} exceeds H(P)={prof.H_p}; the pair is not semi-admissible")


def fidelity_branch(prof: SourceTargetProfile, s1: float) -> str:
    """Name of the closed form used by :func:`second_order_fidelity`."""
    _check_s1(prof, s1)
    if not is_admissible_s1(prof, s1):
        return "non-admissible"
    if prof.p_uniform and prof.q_uniform:
        return "both-uniform"
    if prof.p_uniform:
        return "uniform-source"
    if prof.q_uniform:
        return "uniform-target"
    return "rayleigh-normal"


def _sqrt_phi_scaled(scale: float, arg: float) -> float:
    if math.isinf(scale):
        return 1.0 if arg > 0 else (0.0 if arg < 0 else math.sqrt(0.5))
    return math.sqrt(phi(scale * arg))


def second_order_fidelity(prof: SourceTargetProfile, s1: float, s2: float, t2: float) -> float:
    """Optimal asymptotic fidelity at second-order rates ``(s2, t2)``.

    ``s2 = math.inf`` gives the fidelity without any storage restriction.
    """
    branch = fidelity_branch(prof, s1)
    H_q = prof.H_q
    if branch == "non-admissible":
        scale = math.sqrt(H_q / (prof.V_q * s1)) if prof.V_q > 0 else math.inf
        if math.isinf(s2):
            return 1.0
        return _sqrt_phi_scaled(scale, s2 - H_q * t2)
    if branch == "both-uniform":
        raise UniformError("no second-order fidelity formula when both distributions are uniform")
    if branch == "uniform-source":
        scale = math.sqrt(H_q / (prof.V_q * prof.H_p))
        return _sqrt_phi_scaled(scale, min(s2, 0.0) - H_q * t2)
    if branch == "uniform-target":
        if H_q * t2 <= s2:
            return math.sqrt(phi(-H_q * t2 / math.sqrt(prof.V_p)))
        return 0.0
    z = z_eval(GrnParams(prof.C_pq, s2 / math.sqrt(prof.V_p)), t2 * prof.D_pq)
    return math.sqrt(max(0.0, 1.0 - z))


def second_order_fidelity_inverse(prof: SourceTargetProfile, s1: float, s2: float,
                                  nu: float) -> float:
    """Largest ``t2`` whose optimal fidelity is at least ``nu``.

    The fidelity is non-increasing in ``t2``, so the threshold is found by
    bisection on the predicate ``F(t2) >= nu``; where ``F`` is continuous the
    result solves ``F(t2) = nu``.
    """
    if not 0.0 < nu < 1.0:
        raise RangeError(f"nu must lie in (0, 1), got {nu}")

    def ok(t: float) -> bool:
        return second_order_fidelity(prof, s1, s2, t) >= nu

    width = 10.0 * max(1.0, math.sqrt(prof.V_p) / prof.H_q if prof.V_p > 0 else 1.0)
    lo, hi = -width, width
    for _ in range(200):
        lo_ok, hi_ok = ok(lo), ok(hi)
        if lo_ok and not hi_ok:
            break
        if not lo_ok:
            lo *= 2.0
        if hi_ok:
            hi *= 2.0
    else:
        raise RangeError(f"fidelity {nu} is not attained for s2={s2}")
    while hi - lo > INVERSE_T_TOL * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def region2_contains(prof: SourceTargetProfile, s1: float, nu: float, r: RatePair2) -> bool:
    return r.t2 <= second_order_fidelity_inverse(prof, s1, r.s2, nu) + 1e-10


def expansion_L(prof: SourceTargetProfile, s1: float, s2: float, nu: float, n: int) -> float:
    """Predicted maximal number of target copies from ``n`` source copies."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    t2 = second_order_fidelity_inverse(prof, s1, s2, nu)
    return min(prof.H_p, s1) / prof.H_q * n + t2 * math.sqrt(n)


def simulate_or_better_2nd(t1_over_s1: float, a: RatePair2, b: RatePair2) -> Relation:
    """How pair ``a`` relates to pair ``b``; BETTER takes precedence."""
    if not t1_over_s1 > 0:
        raise DomainError("t1/s1 must be positive")
    if a.s2 <= b.s2 and a.t2 >= b.t2:
        return Relation.BETTER
    expected = a.t2 + t1_over_s1 * (b.s2 - a.s2)
    if a.s2 >= b.s2 and abs(b.t2 - expected) <= RATE_TOL * max(1.0, abs(expected)):
        return Relation.SIMULATES
    return Relation.NEITHER


def classify_rate2(prof: SourceTargetProfile, s1: float, nu: float, r: RatePair2,
                   h: float = 1e-3, line_tol: float = 1e-4,
                   curve_tol: float = 1e-2) -> RateClass:
    """Place ``(s2, t2)`` relative to the second-order region boundary.

    Boundary points on a straight stretch of slope ``t1/s1 = 1/H_q`` are
    simulated by their right neighbours (semi-admissible); flat stretches
    are bettered by the left end (interior); curved points and corners are
    admissible.  Curvature is estimated by a central second difference with
    step ``h``; estimates between the two tolerances are reported as
    UNRESOLVED.
    """
    g = second_order_fidelity_inverse(prof, s1, r.s2, nu)
    if r.t2 > g + 1e-10:
        return RateClass.OUTSIDE
    if r.t2 < g - 1e-10:
        return RateClass.INTERIOR
    if not is_admissible_s1(prof, s1):
        return RateClass.SEMI_ADMISSIBLE
    g_lo = second_order_fidelity_inverse(prof, s1, r.s2 - h, nu)
    g_hi = second_order_fidelity_inverse(prof, s1, r.s2 + h, nu)
    d2 = abs(g_hi - 2.0 * g + g_lo) / (h * h)
    if d2 > curve_tol:
        return RateClass.ADMISSIBLE
    if d2 >= line_tol:
        return RateClass.UNRESOLVED
    slope = (g_hi - g_lo) / (2.0 * h)
    # for C < 1 the boundary is strictly curved and only looks straight far out
    curved_everywhere = fidelity_branch(prof, s1) == "rayleigh-normal" and prof.C_pq < 1
    if abs(slope - 1.0 / prof.H_q) <= 1e-4 / prof.H_q and not curved_everywhere:
        return RateClass.SEMI_ADMISSIBLE
    if abs(slope) <= 1e-9:
        return RateClass.INTERIOR
    return RateClass.ADMISSIBLE


def second_order_threshold(prof: SourceTargetProfile, nu: float) -> float:
    """``sqrt(V_p) * Phi^{-1}(nu**2)``: where a compression storage stops losing fidelity."""
    if prof.p_uniform:
        raise UniformError("threshold undefined for a uniform source")
    return math.sqrt(prof.V_p) * phi_inv(nu * nu)


def compression_min_storage(p: Distribution, nu: float, n: int) -> float:
    """Bits needed to regenerate ``p**n`` with fidelity ``nu`` (second-order accurate)."""
    if p.is_uniform:
        raise UniformError("compression storage is trivial for a uniform source")
    if not 0.0 < nu < 1.0:
        raise RangeError(f"nu must lie in (0, 1), got {nu}")
    H, V = entropy_moments(p)
    return H * n + math.sqrt(V) * phi_inv(nu * nu) * math.sqrt(n)


def ratio_curve(prof: SourceTargetProfile, s2: float,
                t2_grid: Sequence[float]) -> list:
    """Fidelity with storage over fidelity without, at the admissible corner.

    Points where the storage-free fidelity vanishes are returned as ``None``.
    """
    if prof.p_uniform or prof.q_uniform:
        raise UniformError("ratio curve needs non-uniform source and target")
    out: list[Optional[float]] = []
    for t2 in t2_grid:
        den = second_order_fidelity(prof, prof.H_p, math.inf, t2)
        if den <= 0.0:
            out.append(None)
            continue
        out.append(second_order_fidelity(prof, prof.H_p, s2, t2) / den)
    return out
