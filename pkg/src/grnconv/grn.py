"""Generalized Rayleigh-normal distribution functions Z_{v,s}(mu).

``Z_{v,s}(mu) = 1 - sup_A F(dA/dx, N_{mu,v})^2`` where ``A`` ranges over
increasing functions with ``Phi <= A <= 1`` and ``A(s) = 1``.  The closed
forms split on ``v`` (below, at or above 1) and need one or two roots:

* ``beta`` solves ``(1 - Phi(x)) / (Phi_{mu,v}(s) - Phi_{mu,v}(x)) = N(x) / N_{mu,v}(x)``
* ``alpha`` (``v > 1`` only) solves ``Phi(x) / Phi_{mu,v}(x) = N(x) / N_{mu,v}(x)``

Both equations are solved in log form, where every term is well scaled
even when the densities underflow.  :func:`z_oracle` recomputes ``Z`` by a
grid search over explicit feasible envelopes and never touches the roots.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .errors import CaseError, ConvergenceError, DomainError
from . import special_fns
from .special_fns import (NormalParams, find_root, integrate, log_normal_mass,
                          log_normal_pdf, log_npdf, log_phi, log_sf, phi,
                          phi_inv, phi_inv_log)

V_ONE_BAND = 1e-8
TIE_TOL = 1e-12


class CaseTag(enum.Enum):
    V_LT_1 = "v<1"
    V_EQ_1_MU_LE_0 = "v=1,mu<=0"
    V_EQ_1_MU_GT_0 = "v=1,mu>0"
    V_GT_1_SMALL_S = "v>1,s<=threshold"
    V_GT_1_LARGE_S = "v>1,s>threshold"


@dataclass(frozen=True)
class GrnParams:
    """Shape ``v >= 0`` and truncation point ``s`` (``math.inf`` allowed)."""

    v: float
    s: float = math.inf

    def __post_init__(self):
        if math.isnan(self.v) or self.v < 0:
            raise DomainError(f"v must be >= 0, got {self.v}")
        if math.isinf(self.v):
            raise DomainError("v = inf is a limit; use z_limit_v_to_infinity")
        if math.isnan(self.s) or self.s == -math.inf:
            raise DomainError(f"s must be a real number or +inf, got {self.s}")


@dataclass(frozen=True)
class GrnRoots:
    case_tag: CaseTag
    alpha: Optional[float] = None
    beta: Optional[float] = None


def _tol(tol: Optional[float]) -> float:
    return special_fns.ROOT_TOL if tol is None else tol


def _is_unit(v: float) -> bool:
    return abs(v - 1.0) < V_ONE_BAND


def _log_ratio(mu: float, v: float, x: float) -> float:
    """log(N_{mu,v}(x) / N(x)), expanded so the x**2 terms cancel exactly at v = 1."""
    c = 1.0 - 1.0 / v
    quad = 0.5 * x * x * c if c else 0.0  # avoids inf * 0 for huge |x|
    return quad + (mu * x - 0.5 * mu * mu) / v - 0.5 * math.log(v)


def _log_upper_mass(mu: float, v: float, x: float, s: float) -> float:
    """log(Phi_{mu,v}(s) - Phi_{mu,v}(x))."""
    return log_normal_mass(NormalParams(mu, v), x, s)


def beta_residual(mu: float, v: float, s: float, x: float) -> float:
    """Cleared-denominator residual ``f`` of the beta equation.

    ``f(x) = (Phi_{mu,v}(s) - Phi_{mu,v}(x)) - (1 - Phi(x)) N_{mu,v}(x) / N(x)``
    """
    p = NormalParams(mu, v)
    upper = math.exp(log_normal_mass(p, x, s)) if x < s else -math.exp(log_normal_mass(p, s, x))
    return upper - math.exp(log_sf(x) + _log_ratio(mu, v, x))


def alpha_residual(mu: float, v: float, x: float) -> float:
    """Cleared residual ``Phi(x) N_{mu,v}(x) - Phi_{mu,v}(x) N(x)`` of the alpha equation."""
    p = NormalParams(mu, v)
    return (math.exp(log_phi(x) + log_normal_pdf(p, x))
            - math.exp(log_phi((x - mu) / p.sd) + log_npdf(x)))


def _beta_log_residual(mu: float, v: float, s: float):
    # same sign as beta_residual on x < s; -inf at x >= s
    def h(x: float) -> float:
        if x >= s:
            return -math.inf
        return _log_upper_mass(mu, v, x, s) - log_sf(x) - _log_ratio(mu, v, x)
    return h


def _alpha_log_residual(mu: float, v: float):
    sd = math.sqrt(v)

    def k(x: float) -> float:
        return log_phi(x) - log_phi((x - mu) / sd) + _log_ratio(mu, v, x)
    return k


def _scan(h, start: float, step: float, direction: int, want_positive: bool,
          max_doublings: int = 1100) -> float:
    """Walk away from ``start`` geometrically until ``h`` takes the wanted sign."""
    d = step
    for _ in range(max_doublings):
        x = start + direction * d
        y = h(x)
        if (y > 0) == want_positive and y != 0:
            return x
        d *= 2.0
    raise ConvergenceError("bracket scan failed to find a sign change")


def solve_alpha(mu: float, v: float, tol: Optional[float] = None) -> float:
    """Unique root of ``Phi(x)/Phi_{mu,v}(x) = N(x)/N_{mu,v}(x)`` for ``v > 1``."""
    if not v > 1 or _is_unit(v):
        raise CaseError(f"alpha exists only for v > 1 (got v={v})")
    k = _alpha_log_residual(mu, v)
    # k -> -log v < 0 on the far left, k -> +inf on the far right
    centre = mu / (1.0 - v)
    scale = max(1.0, math.sqrt(v), abs(centre))
    kc = k(centre)
    if kc > 0:
        lo = _scan(k, centre, 0.25 * scale, -1, want_positive=False)
        hi = centre
    elif kc < 0:
        lo = centre
        hi = _scan(k, centre, 0.25 * scale, +1, want_positive=True)
    else:
        return centre
    return find_root(k, (lo, hi), tol=_tol(tol))


def beta_threshold(mu: float, v: float, alpha: Optional[float] = None) -> float:
    """``Phi_{mu,v}^{-1}(Phi_{mu,v}(alpha) / Phi(alpha))``, +inf when the ratio is >= 1."""
    if alpha is None:
        alpha = solve_alpha(mu, v)
    sd = math.sqrt(v)
    log_ratio = log_phi((alpha - mu) / sd) - log_phi(alpha)
    if log_ratio >= 0:
        return math.inf
    if log_ratio > -math.log(2.0):
        # invert through the upper tail to keep precision as the ratio nears 1
        return mu - sd * phi_inv(-math.expm1(log_ratio))
    return mu + sd * phi_inv_log(log_ratio)


def solve_beta(mu: float, v: float, s: float, tol: Optional[float] = None) -> float:
    """Root ``beta`` of the truncated balance equation (the larger one when v > 1)."""
    if not v > 0:
        raise CaseError("beta needs v > 0")
    h = _beta_log_residual(mu, v, s)
    sd = math.sqrt(v)
    if _is_unit(v):
        if mu <= 0:
            raise CaseError("beta does not exist for v = 1 and mu <= 0")
        if math.isinf(s):
            raise CaseError("beta is +inf for v = 1 and s = inf")
        hi = s
        lo = _scan(h, hi, 1.0, -1, want_positive=True)
        return find_root(h, (lo, hi), tol=_tol(tol))
    if v < 1:
        hi = min(s, mu / (1.0 - v))
        if h(hi) > 0:  # only possible through rounding at the vertex
            hi = _scan(h, hi, 1e-9 * max(1.0, abs(hi)), +1, want_positive=False)
        lo = _scan(h, hi, max(1.0, sd), -1, want_positive=True)
        return find_root(h, (lo, hi), tol=_tol(tol))
    alpha = solve_alpha(mu, v)
    tau = beta_threshold(mu, v, alpha)
    if not s > tau + TIE_TOL:
        raise CaseError(f"s={s} is not above the threshold {tau}; beta does not exist")
    if math.isinf(s):
        raise CaseError("beta is +inf for v > 1 and s = inf")
    if not h(alpha) > 0:
        raise ConvergenceError("beta residual not positive at alpha above the threshold")
    return find_root(h, (alpha, s), tol=_tol(tol))


def solve_roots(params: GrnParams, mu: float) -> GrnRoots:
    """Case tag plus the roots that the closed form for ``Z_{v,s}(mu)`` needs.

    ``beta`` is stored as ``math.inf`` where it escapes to infinity (``s = inf``
    with ``v >= 1``).
    """
    v, s = params.v, params.s
    mu = float(mu)
    if v == 0:
        raise CaseError("v = 0 has no roots; Z_{0,s} is explicit")
    if _is_unit(v):
        if mu <= 0:
            return GrnRoots(CaseTag.V_EQ_1_MU_LE_0)
        beta = math.inf if math.isinf(s) else solve_beta(mu, 1.0, s)
        return GrnRoots(CaseTag.V_EQ_1_MU_GT_0, beta=beta)
    if v < 1:
        return GrnRoots(CaseTag.V_LT_1, beta=solve_beta(mu, v, s))
    alpha = solve_alpha(mu, v)
    tau = beta_threshold(mu, v, alpha)
    if s <= tau + TIE_TOL:
        return GrnRoots(CaseTag.V_GT_1_SMALL_S, alpha=alpha)
    if math.isinf(s):
        return GrnRoots(CaseTag.V_GT_1_LARGE_S, alpha=alpha, beta=math.inf)
    h = _beta_log_residual(mu, v, s)
    return GrnRoots(CaseTag.V_GT_1_LARGE_S, alpha=alpha,
                    beta=find_root(h, (alpha, s), tol=_tol(None)))


def _i_scale(mu: float, v: float) -> NormalParams:
    return NormalParams(mu / (1.0 + v), 2.0 * v / (1.0 + v))


def _log_i_prefactor(mu: float, v: float) -> float:
    return 0.5 * math.log(2.0 * math.sqrt(v) / (1.0 + v)) - mu * mu / (4.0 * (1.0 + v))


def i_term(mu: float, v: float, x: float) -> float:
    """``I_{mu,v}(x) = int_{-inf}^x sqrt(N(t) N_{mu,v}(t)) dt`` in closed form."""
    if not v > 0:
        raise DomainError("i_term needs v > 0")
    pre = _log_i_prefactor(mu, v)
    if x == math.inf:
        return math.exp(pre)
    q = _i_scale(mu, v)
    return math.exp(pre + log_phi((x - q.mu) / q.sd))


def _i_between(mu: float, v: float, a: float, b: float) -> float:
    """``I_{mu,v}(b) - I_{mu,v}(a)`` without cancellation."""
    q = _i_scale(mu, v)
    return math.exp(_log_i_prefactor(mu, v) + log_normal_mass(q, a, b))


def _tail_term(mu: float, v: float, s: float, beta: float) -> float:
    """sqrt(1 - Phi(beta)) * sqrt(Phi_{mu,v}(s) - Phi_{mu,v}(beta))."""
    return math.exp(0.5 * (log_sf(beta) + _log_upper_mass(mu, v, beta, s)))


def _finish(fid: float) -> float:
    z = 1.0 - fid * fid
    if z < -1e-9 or z > 1.0 + 1e-9:
        raise ConvergenceError(f"Z evaluated outside [0, 1]: {z}")
    return min(1.0, max(0.0, z))


def z_eval(params: GrnParams, mu: float) -> float:
    """Value of the generalized Rayleigh-normal CDF ``Z_{v,s}`` at ``mu``."""
    v, s = params.v, params.s
    mu = float(mu)
    if v == 0:
        return phi(mu) if mu <= s else 1.0
    roots = solve_roots(params, mu)
    tag = roots.case_tag
    if tag is CaseTag.V_EQ_1_MU_LE_0:
        return phi(mu - s) if math.isfinite(s) else 0.0
    if tag is CaseTag.V_GT_1_SMALL_S:
        return phi((mu - s) / math.sqrt(v))
    beta = roots.beta
    if tag is CaseTag.V_EQ_1_MU_GT_0 or tag is CaseTag.V_LT_1:
        vv = 1.0 if tag is CaseTag.V_EQ_1_MU_GT_0 else v
        if beta == math.inf:
            return _finish(i_term(mu, vv, math.inf))
        return _finish(_tail_term(mu, vv, s, beta) + i_term(mu, vv, beta))
    alpha = roots.alpha
    sd = math.sqrt(v)
    head = math.exp(0.5 * (log_phi(alpha) + log_phi((alpha - mu) / sd)))
    middle = _i_between(mu, v, alpha, beta)
    tail = 0.0 if math.isinf(beta) else _tail_term(mu, v, s, beta)
    return _finish(head + middle + tail)


def z_limit_v_to_infinity(s: float, mu: float) -> float:
    """``lim_{v->inf} Z_{v, sqrt(v) s}(sqrt(v) mu) = Phi(mu - min(s, 0))``."""
    return phi(mu - min(s, 0.0))


# ---------------------------------------------------------------------------
# variational oracle
# ---------------------------------------------------------------------------

class _EnvelopeFamily:
    """Feasible envelopes ``A`` built from a cut pair ``b <= b'``.

    On ``(-inf, b]`` the derivative is proportional to ``N_{mu,v}`` with total
    mass ``Phi(b)``; on ``[b, b']`` ``A = Phi``; on ``[b', s]`` the remaining
    mass ``1 - Phi(b')`` is again spread proportionally to ``N_{mu,v}``.
    Candidates violating ``A >= Phi`` are discarded, so every value returned
    is attained by a member of the constraint set.
    """

    def __init__(self, mu: float, v: float, s: float):
        self.mu, self.v, self.s = mu, v, s
        self.sd = math.sqrt(v)
        # left tail of log(Phi_{mu,v}/Phi): -inf for v < 1 (and v = 1, mu > 0)
        if _is_unit(v):
            self.tail_ok = mu <= 0
        else:
            self.tail_ok = v > 1
        left = min(-12.0, mu - 12.0 * self.sd, s - 12.0)
        self.xs = np.linspace(left, s, 8001)
        r = self._log_cdf_ratio(self.xs)
        self.r_cummin = np.minimum.accumulate(r)
        self.left = left
        self.far_left = left - 40.0 * max(1.0, self.sd)
        self._j_cache = {}

    def _log_cdf_ratio(self, x):
        with np.errstate(invalid="ignore"):
            return special.log_ndtr((x - self.mu) / self.sd) - special.log_ndtr(x)

    def _cdf_mu(self, x):
        return special.ndtr((x - self.mu) / self.sd)

    def head(self, b):
        b = np.asarray(b, dtype=float)
        out = np.exp(0.5 * (special.log_ndtr(b) + special.log_ndtr((b - self.mu) / self.sd)))
        return np.where(np.isneginf(b), 0.0, out)

    def tail(self, bp):
        bp = np.asarray(bp, dtype=float)
        mass_mu = np.clip(self._cdf_mu(self.s) - self._cdf_mu(bp), 0.0, None)
        return np.sqrt(special.ndtr(-bp) * mass_mu)

    def head_feasible(self, b):
        b = np.asarray(b, dtype=float)
        if not self.tail_ok:
            return np.isneginf(b)
        idx = np.searchsorted(self.xs, b, side="right") - 1
        rb = self._log_cdf_ratio(b)
        prior = np.where(idx >= 0, self.r_cummin[np.clip(idx, 0, None)], np.inf)
        ok = rb <= prior + 1e-12
        return np.where(np.isneginf(b), True, ok)

    def tail_feasible(self, bp, points: int = 400):
        bp = np.asarray(bp, dtype=float)
        t = np.linspace(0.0, 1.0, points)
        x = bp[:, None] + (self.s - bp[:, None]) * t[None, :]
        d_std = special.ndtr(x) - special.ndtr(bp)[:, None]
        d_mu = self._cdf_mu(x) - self._cdf_mu(bp)[:, None]
        tot_std = special.ndtr(-bp)[:, None]
        tot_mu = (self._cdf_mu(self.s) - self._cdf_mu(bp))[:, None]
        # (Phi(x)-Phi(b'))/(1-Phi(b')) <= (Phi_mu(x)-Phi_mu(b'))/(Phi_mu(s)-Phi_mu(b'))
        ok = d_std * tot_mu <= d_mu * tot_std + 1e-14
        return ok.all(axis=1) & (tot_mu[:, 0] > 0)

    def truncation(self) -> float:
        """Fidelity of ``A = Phi_{mu,v}/Phi_{mu,v}(s)`` below ``s``, or -inf if infeasible."""
        if not self.tail_ok:
            return -math.inf
        log_s = special.log_ndtr((self.s - self.mu) / self.sd)
        ok = np.all(special.log_ndtr((self.xs - self.mu) / self.sd) - log_s
                    >= special.log_ndtr(self.xs) - 1e-12)
        return math.exp(0.5 * log_s) if ok else -math.inf

    def _integrand(self, t: float) -> float:
        return math.exp(0.5 * (log_npdf(t) + log_normal_pdf(NormalParams(self.mu, self.v), t)))

    def overlap(self, x: float) -> float:
        """``int_{-inf}^x sqrt(N N_{mu,v})`` by quadrature from the nearest cached node."""
        if x == -math.inf:
            return 0.0
        if x in self._j_cache:
            return self._j_cache[x]
        below = [k for k in self._j_cache if k <= x]
        if below:
            start = max(below)
            base = self._j_cache[start]
        else:
            start, base = self.far_left, 0.0
        val = base + integrate(self._integrand, start, x, tol=1e-13)
        self._j_cache[x] = val
        return val

    def overlaps(self, xs) -> np.ndarray:
        return np.array([self.overlap(float(x)) for x in sorted(xs)])[
            np.argsort(np.argsort(xs))]


def z_oracle(params: GrnParams, mu: float, grid: int = 400, refine: int = 3) -> float:
    """Upper estimate of ``Z_{v,s}(mu)`` from an explicit envelope search.

    Maximises ``sqrt(Phi(b) Phi_{mu,v}(b)) + int_b^{b'} sqrt(N N_{mu,v})
    + sqrt(1 - Phi(b')) sqrt(Phi_{mu,v}(s) - Phi_{mu,v}(b'))`` over a grid of
    feasible cut pairs, together with the pure truncation envelope, then
    polishes the best pair with ``refine`` rounds of finer one-dimensional
    grids.  Independent of the root equations; meant as a test oracle.
    """
    v, s = params.v, params.s
    if not v > 0:
        raise DomainError("z_oracle needs v > 0")
    if not math.isfinite(s):
        raise DomainError("z_oracle needs a finite s")
    fam = _EnvelopeFamily(mu, v, s)
    hi = min(s, 8.0 + max(0.0, mu))
    lo = min(-8.0, mu - 8.0 * fam.sd, hi - 8.0)
    nodes = np.linspace(lo, hi, grid)
    cand_b = np.concatenate([[-np.inf], nodes])

    j_nodes = fam.overlaps(nodes)
    j_b = np.concatenate([[0.0], j_nodes])
    head = fam.head(cand_b)
    head_ok = fam.head_feasible(cand_b)
    tail = fam.tail(nodes)
    tail_ok = fam.tail_feasible(nodes)

    # value(b, b') = head(b) - J(b) + J(b') + tail(b'), needs b <= b'
    left = np.where(head_ok, head - j_b, -np.inf)
    right = np.where(tail_ok, j_nodes + tail, -np.inf)
    allowed = cand_b[:, None] <= nodes[None, :]
    values = np.where(allowed, left[:, None] + right[None, :], -np.inf)
    best = float(values.max())
    best_fid = max(best, fam.truncation())
    if best > -np.inf:
        i, j = np.unravel_index(int(values.argmax()), values.shape)
        b, bp = float(cand_b[i]), float(nodes[j])
        h = (hi - lo) / (grid - 1)
        for _ in range(refine):
            if math.isfinite(b):
                bs = np.linspace(b - h, min(b + h, bp), 41)
                ok = fam.head_feasible(bs)
                if ok.any():
                    vals = np.where(ok, fam.head(bs) - fam.overlaps(bs), -np.inf)
                    k = int(vals.argmax())
                    cur = float(fam.head(b) - fam.overlap(b))
                    if vals[k] > cur:
                        b = float(bs[k])
            bps = np.linspace(max(bp - h, b if math.isfinite(b) else bp - h), min(bp + h, s), 41)
            ok = fam.tail_feasible(bps)
            if ok.any():
                vals = np.where(ok, fam.overlaps(bps) + fam.tail(bps), -np.inf)
                k = int(vals.argmax())
                cur = float(fam.overlap(bp) + fam.tail(np.array([bp]))[0])
                if vals[k] > cur:
                    bp = float(bps[k])
            h /= 20.0
        left_val = 0.0 if not math.isfinite(b) else float(fam.head(b)) - fam.overlap(b)
        refined = left_val + fam.overlap(bp) + float(fam.tail(np.array([bp]))[0])
        best_fid = max(best_fid, refined)
    if best_fid == -np.inf:
        return 1.0
    return min(1.0, max(0.0, 1.0 - best_fid * best_fid))
