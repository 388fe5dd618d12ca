"""Standard-normal machinery, adaptive quadrature and a bracketing root finder.

Everything here is a pure function of its arguments.  The normal CDF is
built on :func:`math.erfc`, which keeps full relative accuracy deep into
the lower tail; log-space variants are provided for the root equations in
:mod:`grnconv.grn`, whose residuals span hundreds of orders of magnitude.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

from .errors import BracketError, ConvergenceError, DomainError

SQRT2 = math.sqrt(2.0)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

ROOT_TOL = 1e-12
QUAD_TOL = 1e-10


@dataclass(frozen=True)
class NormalParams:
    """Mean and variance of a normal law; ``v`` must be positive."""

    mu: float
    v: float

    def __post_init__(self):
        if not self.v > 0 or math.isinf(self.v):
            raise DomainError(f"variance must be positive and finite, got {self.v}")

    @property
    def sd(self) -> float:
        return math.sqrt(self.v)


def phi(x: float) -> float:
    """Standard normal CDF."""
    if math.isnan(x):
        raise DomainError("phi of NaN")
    return 0.5 * math.erfc(-x / SQRT2)


def log_phi(x: float) -> float:
    """Natural log of the standard normal CDF, accurate in both tails."""
    if x == -math.inf:
        return -math.inf
    if x > 5.0:
        return math.log1p(-0.5 * math.erfc(x / SQRT2))
    if x > -37.0:
        return math.log(0.5 * math.erfc(-x / SQRT2))
    # asymptotic Mills-ratio series; truncation error < 1e-13 for x < -37
    z2 = 1.0 / (x * x)
    series = 1.0 - z2 * (1.0 - 3.0 * z2 * (1.0 - 5.0 * z2 * (1.0 - 7.0 * z2)))
    return -0.5 * x * x - math.log(-x) - LOG_SQRT_2PI + math.log(series)


def log_sf(x: float) -> float:
    """Natural log of ``1 - phi(x)``."""
    return log_phi(-x)


def npdf(x: float) -> float:
    """Standard normal density."""
    return math.exp(-0.5 * x * x - LOG_SQRT_2PI)


def log_npdf(x: float) -> float:
    return -0.5 * x * x - LOG_SQRT_2PI


# Acklam's rational approximation; relative error about 1e-9 before refinement.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        return num / den
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    return num / den


def phi_inv(p: float) -> float:
    """Inverse of :func:`phi` on the open unit interval.

    Rational initial guess refined by two Newton steps.  In the lower tail
    the Newton update is taken on ``log phi`` so that it stays well scaled.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"phi_inv needs 0 < p < 1, got {p}")
    if p == 0.5:
        return 0.0
    upper = p > 0.5
    tail = 1.0 - p if upper else p
    x = _acklam(tail)
    log_tail = math.log(tail)
    for _ in range(2):
        # x solves phi(x) = tail with x < 0
        x -= (log_phi(x) - log_tail) * math.exp(log_phi(x) - log_npdf(x))
    return -x if upper else x


def phi_inv_log(log_p: float) -> float:
    """Inverse of :func:`log_phi`; reaches probabilities far below the float range."""
    if not log_p < 0.0:
        raise DomainError(f"phi_inv_log needs log_p < 0, got {log_p}")
    if log_p > -700.0:
        return phi_inv(math.exp(log_p))
    lo = -math.sqrt(-2.0 * log_p) - 3.0
    return find_root(lambda x: log_phi(x) - log_p, (lo, -1.0), tol=1e-13 * abs(lo))


def normal_cdf(p: NormalParams, x: float) -> float:
    """CDF of N(mu, v) at ``x``."""
    return phi((x - p.mu) / p.sd)


def normal_pdf(p: NormalParams, x: float) -> float:
    """Density of N(mu, v) at ``x``."""
    z = (x - p.mu) / p.sd
    return npdf(z) / p.sd


def log_normal_pdf(p: NormalParams, x: float) -> float:
    z = (x - p.mu) / p.sd
    return log_npdf(z) - 0.5 * math.log(p.v)


def log_std_mass(a: float, b: float) -> float:
    """log(phi(b) - phi(a)) for ``a < b``; ``-inf`` when ``a >= b``.

    Chooses the CDF or survival form so that the subtraction never cancels.
    """
    if not a < b:
        return -math.inf
    w = b - a
    if w * max(1.0, abs(a), abs(b)) < 1e-3:
        # narrow interval: midpoint rule with its curvature correction
        m = 0.5 * (a + b)
        return log_npdf(m) + math.log(w) + math.log1p((m * m - 1.0) * w * w / 24.0)
    if b <= 0.0:
        lb = log_phi(b)
        return lb + math.log(-math.expm1(log_phi(a) - lb)) if a > -math.inf else lb
    if a >= 0.0:
        la = log_phi(-a)
        return la + math.log(-math.expm1(log_phi(-b) - la)) if b < math.inf else la
    # straddles zero: the two erf halves have opposite signs, so they add
    mass = 0.5 * (math.erf(b / SQRT2) - math.erf(a / SQRT2))
    return math.log(mass) if mass > 0.0 else -math.inf


def std_mass(a: float, b: float) -> float:
    """phi(b) - phi(a) evaluated without cancellation."""
    return math.exp(log_std_mass(a, b))


def normal_mass(p: NormalParams, a: float, b: float) -> float:
    """Probability that N(mu, v) falls in ``(a, b]``."""
    return std_mass((a - p.mu) / p.sd, (b - p.mu) / p.sd)


def log_normal_mass(p: NormalParams, a: float, b: float) -> float:
    return log_std_mass((a - p.mu) / p.sd, (b - p.mu) / p.sd)


# Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
_XGK = (0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.0)
_WGK = (0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714)
_WG = (0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
       0.381830050505118944950369775488975, 0.417959183673469387755102040816327)


def _gk15(f: Callable[[float], float], a: float, b: float) -> tuple[float, float]:
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    fc = f(c)
    kron = fc * _WGK[7]
    gauss = fc * _WG[3]
    for j in range(7):
        dx = h * _XGK[j]
        s = f(c - dx) + f(c + dx)
        kron += _WGK[j] * s
        if j % 2 == 1:
            gauss += _WG[j // 2] * s
    return kron * h, abs((kron - gauss) * h)


def integrate(f: Callable[[float], float], a: float, b: float,
              tol: float = QUAD_TOL, max_intervals: int = 2000) -> float:
    """Adaptive Gauss-Kronrod quadrature of ``f`` over the finite range [a, b].

    The interval with the largest error estimate is bisected until the summed
    estimate drops below ``tol``.  Raises :class:`ConvergenceError` when the
    subdivision budget runs out first.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("integrate needs a finite range; truncate the tails")
    if a > b:
        raise DomainError("integrate needs a <= b")
    if a == b:
        return 0.0
    val, err = _gk15(f, a, b)
    heap = [(-err, a, b, val)]
    total, total_err = val, err
    while total_err > tol:
        if len(heap) >= max_intervals:
            raise ConvergenceError(
                f"quadrature budget of {max_intervals} intervals exhausted "
                f"(error estimate {total_err:.3g} > {tol:.3g})")
        neg_err, lo, hi, v = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        total += v1 + v2 - v
        total_err += e1 + e2 + neg_err
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
    # re-sum to shed the drift of the running total
    return math.fsum(item[3] for item in heap)


def _sign(y: float) -> int:
    return int(y > 0) - int(y < 0)


def find_root(f: Callable[[float], float], bracket: tuple[float, float],
              tol: float = ROOT_TOL, max_iter: int = 400) -> float:
    """Root of a continuous ``f`` inside ``bracket`` by safeguarded regula falsi.

    Illinois-modified false position steps are accepted only while they shrink
    the bracket quickly; otherwise the method bisects, so convergence is
    guaranteed.  Infinite function values are allowed and only their sign is
    used.  Returns a point of the final bracket of width at most ``tol``.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if lo > hi:
        lo, hi = hi, lo
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    slo, shi = _sign(flo), _sign(fhi)
    if slo == shi:
        raise BracketError(f"f({lo})={flo} and f({hi})={fhi} share a sign")
    side = 0
    width = hi - lo
    for _ in range(max_iter):
        if hi - lo <= tol or hi - lo <= 4e-16 * max(abs(lo), abs(hi)):
            break
        finite = math.isfinite(flo) and math.isfinite(fhi)
        if finite:
            x = hi - fhi * (hi - lo) / (fhi - flo)
            if not lo < x < hi:
                x = 0.5 * (lo + hi)
        else:
            x = 0.5 * (lo + hi)
        fx = f(x)
        if fx == 0 or math.isnan(fx):
            if fx == 0:
                return x
            raise ConvergenceError(f"f({x}) is NaN")
        if _sign(fx) == slo:
            lo, flo = x, fx
            if side == -1 and math.isfinite(fhi):
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = x, fx
            if side == 1 and math.isfinite(flo):
                flo *= 0.5
            side = 1
        # force a bisection when false position stalls
        if hi - lo > 0.5 * width:
            mid = 0.5 * (lo + hi)
            fm = f(mid)
            if fm == 0:
                return mid
            if _sign(fm) == slo:
                lo, flo = mid, fm
            else:
                hi, fhi = mid, fm
            side = 0
        width = hi - lo
    else:
        raise ConvergenceError("find_root iteration budget exhausted")
    return 0.5 * (lo + hi)
