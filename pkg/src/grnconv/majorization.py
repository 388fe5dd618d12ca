"""Finite-size random number conversion: majorization, fidelity and storage.

Distributions are stored as *levels*: strictly decreasing probability values,
each with an integer multiplicity.  An i.i.d. power of a binary law then has
``n + 1`` levels instead of ``2**n`` atoms, and every routine below works on
the level representation directly.  Probabilities are kept as logarithms so
that levels far below the float range still compare and combine correctly;
multiplicities are exact Python integers.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import CapacityError, DomainError, SizeError

MASS_TOL = 1e-9
MERGE_TOL = 1e-12
PREFIX_SLACK = 1e-12
L_SLACK = 1e-12
COMPOSITION_BUDGET = 10 ** 6
DETERMINISTIC_BUDGET = 4 ** 9
ENUMERATION_MAX_DIM = 16


def _logsumexp(values: Iterable[float]) -> float:
    vals = [x for x in values if x != -math.inf]
    if not vals:
        return -math.inf
    top = max(vals)
    return top + math.log(math.fsum(math.exp(x - top) for x in vals))


def _log_int(n: int) -> float:
    return math.log(n) if n > 0 else -math.inf


@dataclass(frozen=True)
class Distribution:
    """Finite probability distribution in level/multiplicity form.

    Use :meth:`from_probs`, :meth:`from_levels` or :meth:`uniform` rather than
    the raw constructor; they sort, drop zeros, merge equal levels and check
    normalisation.
    """

    log_probs: tuple
    mults: tuple

    def __post_init__(self):
        if len(self.log_probs) != len(self.mults):
            raise DomainError("log_probs and mults differ in length")
        if not self.log_probs:
            raise DomainError("a distribution needs at least one atom")
        for a, b in zip(self.log_probs, self.log_probs[1:]):
            if not a > b:
                raise DomainError("levels must be strictly decreasing")
        if any(m < 1 for m in self.mults):
            raise DomainError("multiplicities must be positive integers")
        total = self.log_total()
        if abs(math.expm1(total)) > MASS_TOL:
            raise DomainError(f"probabilities sum to {math.exp(total)!r}, not 1")

    # construction ---------------------------------------------------------

    @classmethod
    def from_log_levels(cls, log_probs: Sequence[float], mults: Sequence[int]) -> "Distribution":
        """Sort, drop empty atoms and merge levels equal within a relative 1e-12."""
        pairs = sorted(((float(lp), int(m)) for lp, m in zip(log_probs, mults)
                        if lp != -math.inf and m > 0), key=lambda t: -t[0])
        out_lp, out_m = [], []
        for lp, m in pairs:
            if out_lp and abs(out_lp[-1] - lp) <= MERGE_TOL * max(1.0, abs(lp)):
                # keep the mass-weighted level
                old_m = out_m[-1]
                out_lp[-1] = _logsumexp([out_lp[-1] + _log_int(old_m), lp + _log_int(m)]) \
                    - _log_int(old_m + m)
                out_m[-1] = old_m + m
            else:
                out_lp.append(lp)
                out_m.append(m)
        return cls(tuple(out_lp), tuple(out_m))

    @classmethod
    def from_probs(cls, probs: Iterable[float]) -> "Distribution":
        probs = [float(p) for p in probs]
        if any(p < 0 or math.isnan(p) for p in probs):
            raise DomainError("probabilities must be non-negative")
        return cls.from_log_levels([math.log(p) if p > 0 else -math.inf for p in probs],
                                   [1] * len(probs))

    @classmethod
    def from_levels(cls, levels: Iterable[tuple]) -> "Distribution":
        lps, ms = [], []
        for p, m in levels:
            p = float(p)
            if p < 0 or math.isnan(p):
                raise DomainError("probabilities must be non-negative")
            if int(m) != m or m < 0:
                raise DomainError("multiplicities must be non-negative integers")
            lps.append(math.log(p) if p > 0 else -math.inf)
            ms.append(int(m))
        return cls.from_log_levels(lps, ms)

    @classmethod
    def uniform(cls, size: int) -> "Distribution":
        if size < 1:
            raise DomainError("uniform distribution needs size >= 1")
        return cls((-math.log(size),), (int(size),))

    @classmethod
    def from_json(cls, obj: dict) -> "Distribution":
        """Parse ``{"probs": [...]}`` or ``{"levels": [[p, mult], ...]}``."""
        if "probs" in obj:
            return cls.from_probs(obj["probs"])
        if "levels" in obj:
            return cls.from_levels(obj["levels"])
        raise DomainError("distribution JSON needs a 'probs' or 'levels' key")

    def to_json(self) -> dict:
        return {"levels": [[p, m] for p, m in self.levels]}

    # views ----------------------------------------------------------------

    @property
    def levels(self) -> list:
        return [(math.exp(lp), m) for lp, m in zip(self.log_probs, self.mults)]

    @property
    def probs(self) -> np.ndarray:
        return np.exp(np.array(self.log_probs))

    @property
    def support(self) -> int:
        return sum(self.mults)

    @property
    def is_uniform(self) -> bool:
        return len(self.log_probs) == 1

    def log_total(self) -> float:
        return _logsumexp(lp + _log_int(m) for lp, m in zip(self.log_probs, self.mults))

    def dense(self, max_size: int = 10 ** 6) -> np.ndarray:
        """Decreasingly sorted probability vector."""
        if self.support > max_size:
            raise SizeError(f"support {self.support} too large to expand densely")
        return np.repeat(self.probs, self.mults)

    def __len__(self) -> int:
        return len(self.log_probs)


@dataclass(frozen=True)
class ConversionResult:
    """Optimal fidelity, an optimal intermediate distribution and its active cuts."""

    fidelity: float
    witness: Distribution
    tight_prefixes: list = field(default_factory=list)


class Mode(enum.Enum):
    DETERMINISTIC = "deterministic"
    MAJORIZATION = "majorization"


# ---------------------------------------------------------------------------
# aligned segments
# ---------------------------------------------------------------------------

def _segments(p: Distribution, q: Distribution):
    """Split positions 1..max(|p|,|q|) into runs where both sorted vectors are constant.

    Yields ``(count, log_p, log_q)`` with ``-inf`` past the end of a support.
    """
    i = j = 0
    left_p = p.mults[0]
    left_q = q.mults[0]
    np_, nq = len(p.mults), len(q.mults)
    while i < np_ or j < nq:
        lp = p.log_probs[i] if i < np_ else -math.inf
        lq = q.log_probs[j] if j < nq else -math.inf
        if i >= np_:
            step = left_q
        elif j >= nq:
            step = left_p
        else:
            step = min(left_p, left_q)
        yield step, lp, lq
        if i < np_:
            left_p -= step
            if left_p == 0:
                i += 1
                left_p = p.mults[i] if i < np_ else 0
        if j < nq:
            left_q -= step
            if left_q == 0:
                j += 1
                left_q = q.mults[j] if j < nq else 0


def fidelity(p: Distribution, q: Distribution) -> float:
    """Bhattacharyya coefficient of the decreasingly aligned vectors."""
    terms = [math.exp(0.5 * (lp + lq) + _log_int(c))
             for c, lp, lq in _segments(p, q) if lp > -math.inf and lq > -math.inf]
    return min(1.0, math.fsum(terms))


def is_majorized(p: Distribution, q: Distribution, slack: float = PREFIX_SLACK) -> bool:
    """``p ≺ q``: every prefix sum of sorted ``p`` is at most that of sorted ``q``.

    Prefix sums are piecewise linear between level boundaries, so checking
    the merged boundaries suffices.
    """
    cp = cq = 0.0
    for c, lp, lq in _segments(p, q):
        if lp > -math.inf:
            cp += math.exp(lp + _log_int(c))
        if lq > -math.inf:
            cq += math.exp(lq + _log_int(c))
        if cp > cq + slack:
            return False
    return True


# ---------------------------------------------------------------------------
# storage conditioning
# ---------------------------------------------------------------------------

def capacity_from_bits(n_bits: float) -> int:
    """``floor(2**n_bits)`` as an exact integer.

    Values within a relative 1e-9 of an integer are rounded to it, so that
    ``m * log2(N)`` bits give capacity ``N**m`` rather than ``N**m - 1``.
    """
    if math.isnan(n_bits) or n_bits < 0:
        raise CapacityError(f"storage size must be >= 0 bits, got {n_bits}")
    if math.isinf(n_bits):
        raise CapacityError("storage size must be finite; pass None for unlimited storage")
    if n_bits < 1000:
        x = 2.0 ** n_bits
        r = round(x)
        if abs(x - r) <= 1e-9 * x:
            return int(r)
        return int(math.floor(x))
    k = int(math.floor(n_bits))
    mant = 2.0 ** (n_bits - k)
    return int(mant * 2 ** 52) << (k - 52)


def _log_suffix_masses(p: Distribution) -> list:
    """``out[i]`` = log of the total mass of levels ``i, i+1, ...``; ``out[len]`` = -inf."""
    out = [-math.inf] * (len(p) + 1)
    for i in range(len(p) - 1, -1, -1):
        out[i] = np.logaddexp(out[i + 1], p.log_probs[i] + _log_int(p.mults[i]))
    return [float(x) for x in out]


def storage_cut(p: Distribution, capacity: int) -> tuple:
    """Number of kept top levels and the kept atom count ``J``.

    ``J`` is the largest ``j <= capacity - 1`` with
    ``sum_{i>j} p_i < (capacity - j) p_j``.  The left side minus the right is
    non-decreasing in ``j`` and constant across a level, so ``J`` always
    sits at a level boundary.
    """
    suffix = _log_suffix_masses(p)
    kept_levels, kept_atoms = 0, 0
    for i, (lp, m) in enumerate(zip(p.log_probs, p.mults)):
        end = kept_atoms + m
        if end > capacity - 1:
            break
        if not suffix[i + 1] < _log_int(capacity - end) + lp:
            break
        kept_levels, kept_atoms = i + 1, end
    return kept_levels, kept_atoms


def condition_to_storage(p: Distribution, capacity: int) -> Distribution:
    """Best storage intermediate ``C_K(p)`` for a ``capacity``-slot storage.

    Keeps the top ``J`` atoms and spreads the remaining mass evenly over the
    other ``capacity - J`` slots.
    """
    capacity = int(capacity)
    if capacity < 1:
        raise CapacityError(f"capacity must be >= 1, got {capacity}")
    if p.support <= capacity:
        return p
    levels, atoms = storage_cut(p, capacity)
    suffix = _log_suffix_masses(p)
    lps = list(p.log_probs[:levels])
    ms = list(p.mults[:levels])
    tail = suffix[levels]
    if tail > -math.inf:
        lps.append(tail - _log_int(capacity - atoms))
        ms.append(capacity - atoms)
    return Distribution.from_log_levels(lps, ms)


# ---------------------------------------------------------------------------
# majorization-constrained maximal fidelity
# ---------------------------------------------------------------------------

def _slope(block) -> float:
    lp, lq = block[0], block[1]
    if lq == -math.inf:
        return math.inf
    return lp - lq


def _pav_blocks(p: Distribution, q: Distribution):
    """Blocks of the least concave majorant of the (Q-prefix, P-prefix) diagram.

    Each block is ``[log P-mass, log Q-mass, first segment, last segment]``.
    Adjacent blocks are pooled while the p/q density ratio increases.
    """
    segs = list(_segments(p, q))
    blocks = []
    for k, (c, lp, lq) in enumerate(segs):
        lc = _log_int(c)
        blocks.append([lp + lc, lq + lc, k, k])
        while len(blocks) >= 2 and _slope(blocks[-1]) > _slope(blocks[-2]):
            top = blocks.pop()
            below = blocks[-1]
            below[0] = float(np.logaddexp(below[0], top[0]))
            below[1] = float(np.logaddexp(below[1], top[1]))
            below[3] = top[3]
    return segs, blocks


def _result_from_blocks(segs, blocks) -> ConversionResult:
    fid_terms, lps, ms, cuts = [], [], [], []
    pos = 0
    for lP, lQ, first, last in blocks:
        if lP > -math.inf and lQ > -math.inf:
            fid_terms.append(math.exp(0.5 * (lP + lQ)))
            scale = lP - lQ
            for c, _, lq in segs[first:last + 1]:
                if lq > -math.inf:
                    lps.append(scale + lq)
                    ms.append(c)
        pos += sum(c for c, _, _ in segs[first:last + 1])
        cuts.append(pos)
    witness = Distribution.from_log_levels(lps, ms)
    return ConversionResult(min(1.0, math.fsum(fid_terms)), witness, cuts[:-1])


def _enumerate_active_sets(p: Distribution, q: Distribution) -> ConversionResult:
    pd, qd = p.dense(), q.dense()
    d = max(len(pd), len(qd))
    if d > ENUMERATION_MAX_DIM:
        raise SizeError(f"active-set enumeration limited to dimension {ENUMERATION_MAX_DIM}")
    pv = np.zeros(d)
    qv = np.zeros(d)
    pv[:len(pd)] = pd
    qv[:len(qd)] = qd
    prefix_p = np.cumsum(pv)
    best, best_x, best_cuts = -1.0, None, None
    for r in range(d):
        for inner in itertools.combinations(range(1, d), r):
            bounds = (0,) + inner + (d,)
            x = np.zeros(d)
            value = 0.0
            ok = True
            for a, b in zip(bounds, bounds[1:]):
                pm, qm = pv[a:b].sum(), qv[a:b].sum()
                if qm == 0:
                    if pm > 0:
                        ok = False
                        break
                    continue
                x[a:b] = pm / qm * qv[a:b]
                value += math.sqrt(pm * qm)
            if not ok or np.any(np.cumsum(x) < prefix_p - PREFIX_SLACK):
                continue
            if value > best:
                best, best_x, best_cuts = value, x, list(inner)
    return ConversionResult(min(1.0, best), Distribution.from_probs(best_x), best_cuts)


def max_fidelity_majorization(p: Distribution, q: Distribution,
                              method: str = "pav") -> ConversionResult:
    """``F^M(p -> q)``: best fidelity to ``q`` over all ``p' `` with ``p ≺ p'``.

    The optimum puts ``x_i = w_B q_i`` on consecutive blocks ``B`` of the sorted
    positions, with ``w_B`` the ratio of block masses of ``p`` and ``q``; the
    blocks are the linear pieces of the least concave majorant of the points
    (cumulative q, cumulative p), found by pool-adjacent-violators.
    ``method="enumerate"`` instead tries every set of tight prefix constraints
    (small dense instances only) and is kept as a reference.
    """
    if method == "pav":
        segs, blocks = _pav_blocks(p, q)
        return _result_from_blocks(segs, blocks)
    if method == "enumerate":
        return _enumerate_active_sets(p, q)
    raise DomainError(f"unknown method {method!r}")


def kkt_residual(p: Distribution, q: Distribution, result: ConversionResult) -> float:
    """Largest violation of the optimality conditions of a block solution.

    Checks primal feasibility (prefix domination and unit mass) and that the
    block water levels ``w_B`` are non-increasing, which makes the multipliers
    of the tight cuts non-negative.
    """
    _, blocks = _pav_blocks(p, q)
    worst = abs(math.expm1(result.witness.log_total()))
    cp = cx = 0.0
    for c, lp, lx in _segments(p, result.witness):
        if lp > -math.inf:
            cp += math.exp(lp + _log_int(c))
        if lx > -math.inf:
            cx += math.exp(lx + _log_int(c))
        worst = max(worst, cp - cx)
    levels = [_slope(b) for b in blocks if b[1] > -math.inf and b[0] > -math.inf]
    for a, b in zip(levels, levels[1:]):
        worst = max(worst, math.exp(b) - math.exp(a))
    worst = max(worst, abs(fidelity(result.witness, q) - result.fidelity))
    return worst


def max_fidelity_majorization_with_storage(p: Distribution, q: Distribution,
                                           n_bits: Optional[float],
                                           capacity: Optional[int] = None) -> ConversionResult:
    """``F^M(p -> q | n_bits)`` through a storage of ``floor(2**n_bits)`` slots.

    ``capacity`` overrides the slot count computed from ``n_bits``; with both
    ``None`` the storage is unlimited.
    """
    if capacity is None and n_bits is not None:
        capacity = capacity_from_bits(n_bits)
    if capacity is None:
        return max_fidelity_majorization(p, q)
    if capacity < 1:
        raise CapacityError(f"capacity must be >= 1, got {capacity}")
    result = max_fidelity_majorization(condition_to_storage(p, capacity), q)
    bound = _top_mass_root(q, capacity)
    if result.fidelity > bound + 1e-12:
        raise ArithmeticError(f"storage bound violated: {result.fidelity} > {bound}")
    return result


def _top_mass_root(q: Distribution, k: int) -> float:
    """sqrt of the total probability of the ``k`` largest atoms of ``q``."""
    terms, left = [], k
    for lq, m in zip(q.log_probs, q.mults):
        if left <= 0:
            break
        take = min(m, left)
        terms.append(math.exp(lq + _log_int(take)))
        left -= take
    return math.sqrt(min(1.0, math.fsum(terms)))


# ---------------------------------------------------------------------------
# deterministic conversion by brute force
# ---------------------------------------------------------------------------

def max_fidelity_deterministic(p, q, capacity: Optional[int] = None) -> float:
    """``F^D``: best fidelity over all maps ``X -> Y`` (image size <= ``capacity``).

    ``p`` and ``q`` are Distributions or probability vectors.  Exhaustive, so
    limited to ``|Y|**|X| <= 4**9`` maps.
    """
    pd = p.dense() if isinstance(p, Distribution) else np.asarray(p, dtype=float)
    qd = q.dense() if isinstance(q, Distribution) else np.asarray(q, dtype=float)
    pd, qd = pd[pd > 0], qd[qd > 0]
    nx, ny = len(pd), len(qd)
    if float(ny) ** nx > DETERMINISTIC_BUDGET:
        raise SizeError(f"{ny}**{nx} maps exceed the brute-force budget of {DETERMINISTIC_BUDGET}")
    if capacity is not None and capacity < 1:
        raise CapacityError(f"capacity must be >= 1, got {capacity}")
    maps = np.stack(np.unravel_index(np.arange(ny ** nx), (ny,) * nx), axis=1)
    images = np.stack([(maps == y) @ pd for y in range(ny)], axis=1)
    fids = np.sqrt(images * qd[None, :]).sum(axis=1)
    if capacity is not None and capacity < min(nx, ny):
        used = np.stack([(maps == y).any(axis=1) for y in range(ny)], axis=1).sum(axis=1)
        fids = np.where(used <= capacity, fids, -np.inf)
    return float(min(1.0, fids.max()))


# ---------------------------------------------------------------------------
# i.i.d. powers and convertible numbers
# ---------------------------------------------------------------------------

def _type_classes(n: int, log_probs: Sequence[float], mults: Sequence[int]):
    """Yield ``(log probability, size)`` of every type class of ``n`` draws.

    Binomial factors and multiplicity powers are updated incrementally, which
    keeps the big-integer work linear in the number of classes.
    """
    if len(log_probs) == 1:
        yield n * log_probs[0], mults[0] ** n
        return
    lp0, m0 = log_probs[0], mults[0]
    weight = 1  # comb(n, c) * m0**c
    for c in range(n + 1):
        for lp, size in _type_classes(n - c, log_probs[1:], mults[1:]):
            yield c * lp0 + lp, weight * size
        weight = weight * (n - c) * m0 // (c + 1)


def iid_power(base: Distribution, n: int) -> Distribution:
    """``base**n`` by type classes: one level per composition of ``n`` over the levels."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    k = len(base)
    count = math.comb(n + k - 1, k - 1)
    if count > COMPOSITION_BUDGET:
        raise SizeError(f"{count} type classes exceed the budget of {COMPOSITION_BUDGET}")
    if k == 1:
        return Distribution((n * base.log_probs[0],), (base.mults[0] ** n,))
    lps, ms = [], []
    for lp, size in _type_classes(n, base.log_probs, base.mults):
        lps.append(lp)
        ms.append(size)
    return Distribution.from_log_levels(lps, ms)


def max_convertible_number(p: Distribution, q_base: Distribution, nu: float,
                           n_bits: Optional[float] = None,
                           mode: Mode = Mode.MAJORIZATION,
                           capacity: Optional[int] = None,
                           max_copies: int = 10 ** 6) -> int:
    """Largest ``L`` with maximal fidelity ``p -> q_base**L`` at least ``nu``.

    Fidelity is non-increasing in ``L``, so ``L`` is bracketed by doubling and
    then found by bisection.  ``n_bits`` (or an explicit ``capacity``) limits
    the storage.  The comparison allows a slack of 1e-12 below ``nu``.
    """
    if not 0.0 < nu < 1.0:
        raise DomainError(f"nu must lie in (0, 1), got {nu}")
    if q_base.support < 2:
        raise DomainError("target base needs at least two atoms")
    mode = Mode(mode)
    if capacity is None and n_bits is not None:
        capacity = capacity_from_bits(n_bits)
    memo = {}

    def ok(L: int) -> bool:
        if L not in memo:
            target = iid_power(q_base, L)
            fm = max_fidelity_majorization_with_storage(p, target, None, capacity).fidelity
            if mode is Mode.MAJORIZATION or fm < nu - L_SLACK:
                memo[L] = fm >= nu - L_SLACK
            else:
                memo[L] = max_fidelity_deterministic(p, target, capacity) >= nu - L_SLACK
        return memo[L]

    if not ok(1):
        return 0
    lo, hi = 1, 2
    while ok(hi):
        lo = hi
        hi *= 2
        if hi > max_copies:
            raise SizeError(f"convertible number exceeds {max_copies}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo
