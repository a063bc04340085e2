"""Learning valuation ratios from price queries.

The merchant posts prices and watches what the consumer buys.  Three phases
recover ``s_i = v_i / v_min`` exactly:

1. Query the all-ones price vector and find the pivot ``j``, the least
   preferred good that is still bought.
2. For every good left unbought, bisect its price (others at 1) to find the
   point where it becomes competitive with ``j``; this brackets
   ``v_k / v_j``.
3. For the remaining bought goods, from least to most preferred, scale the
   prices of every already-learned good by ``alpha`` so that they share one
   bang per buck, and bisect ``alpha`` for the point where the next good is
   squeezed out of the bundle.  That point is ``v_min / v_k``.  Goods that
   can never be squeezed out are always purchased and stay unlearned.

All brackets are kept as exact fractions.  Because valuations are multiples
of ``delta``, every ratio is ``a/b`` with ``1 <= a <= b <= 1/delta``; once a
bracket is narrower than the gap between such fractions it is snapped to the
single one inside it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .core import ATOL, FloatArray, grid_size

Oracle = Callable[[FloatArray], FloatArray]

# Smaller budgets buy fractions too small to tell apart from nothing.
MIN_BUDGET = 1e-6


class SnapError(RuntimeError):
    """A bracket did not contain exactly one admissible ratio."""


class Pivot(enum.Enum):
    ALL_PURCHASED = "all-purchased"


ALL_PURCHASED = Pivot.ALL_PURCHASED


@dataclass
class QueryBudgetLog:
    """Every (prices, bundle) pair observed, in query order."""

    queries: list[tuple[FloatArray, FloatArray]] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.queries)

    def __len__(self) -> int:
        return len(self.queries)


class QueryOracle:
    """Wraps a consumer so each query is logged."""

    def __init__(self, consumer: Oracle, log: QueryBudgetLog | None = None):
        self.consumer = consumer
        self.log = log if log is not None else QueryBudgetLog()

    def __call__(self, p: FloatArray) -> FloatArray:
        p = np.array(p, dtype=np.float64)
        x = np.array(self.consumer(p), dtype=np.float64)
        self.log.queries.append((p, x))
        return x


@dataclass(frozen=True)
class LearnedRatios:
    """Result of :func:`learn_valuations`.

    ``s[i]`` is ``v_i / v_min`` as an exact fraction, or ``None`` for goods
    proven to be purchased at every price vector.
    """

    s: tuple[Fraction | None, ...]
    j: int | None
    log: QueryBudgetLog

    @property
    def unlearnable(self) -> frozenset[int]:
        return frozenset(i for i, si in enumerate(self.s) if si is None)

    @property
    def learnable(self) -> tuple[int, ...]:
        return tuple(i for i, si in enumerate(self.s) if si is not None)

    @property
    def queries(self) -> int:
        return self.log.count


def query_bound(n: int, delta: float, C: float = 10.0) -> float:
    """``C * n * log2((1 - delta) / delta^2)``, the query budget checked in tests."""
    return C * n * math.log2((1.0 - delta) / delta**2)


def snap_ratio(lo: Fraction, hi: Fraction, N: int) -> Fraction:
    """Unique ``a/b`` with ``1 <= a <= b <= N`` inside ``[lo, hi]``."""
    found: set[Fraction] = set()
    for b in range(1, N + 1):
        a_min = max(1, math.ceil(lo * b))
        a_max = min(b, math.floor(hi * b))
        for a in range(a_min, a_max + 1):
            found.add(Fraction(a, b))
    if len(found) != 1:
        raise SnapError(f"[{lo}, {hi}] holds {len(found)} grid ratios: {sorted(found)}")
    return found.pop()


def _bought(x: FloatArray, i: int) -> bool:
    return bool(x[i] > ATOL)


def find_pivot(oracle: Oracle, n: int, delta: float) -> int | Pivot:
    """Query all-ones prices and identify the least preferred bought good.

    If no good is bought fractionally, one unbought good is dropped to the
    price floor ``delta``; it then outranks every other good, and the good
    it displaces is left fractional.
    """
    p = np.ones(n)
    x = oracle(p)
    frac = [i for i in range(n) if ATOL < x[i] < 1.0 - ATOL]
    if frac:
        return frac[0]
    unbought = [i for i in range(n) if not _bought(x, i)]
    if not unbought:
        return ALL_PURCHASED
    bought = [i for i in range(n) if _bought(x, i)]
    if not bought:
        raise ValueError("consumer buys nothing at all-ones prices (zero budget?)")
    k = unbought[0]
    p[k] = delta
    x = oracle(p)
    frac = [i for i in bought if ATOL < x[i] < 1.0 - ATOL]
    if len(frac) != 1:
        raise RuntimeError(f"could not locate pivot: bundle {x.tolist()} at {p.tolist()}")
    return frac[0]


def _bisect(
    probe: Callable[[Fraction], bool],
    lo: Fraction,
    hi: Fraction,
    resolution: Fraction,
    linear: bool = False,
) -> tuple[Fraction, Fraction]:
    """Shrink ``[lo, hi]`` with ``probe`` true at ``lo`` and false at ``hi``.

    ``linear`` walks down from ``hi`` one resolution step at a time instead.
    """
    if linear:
        t = hi - resolution
        while t > lo:
            if probe(t):
                return t, hi
            hi = t
            t = hi - resolution
        return lo, hi
    while hi - lo > resolution:
        mid = (lo + hi) / 2
        if probe(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def learn_lower_ratios(
    j: int,
    oracle: Oracle,
    delta: float,
    bundle_at_ones: FloatArray,
    linear: bool = False,
) -> dict[int, Fraction]:
    """Ratios ``v_k / v_j`` for every good unbought at all-ones prices.

    Each good's price is bisected on ``[delta, 1]`` with all other prices at
    1, down to resolution ``delta^2 / 2``.  Bought at price ``p`` means
    ``v_k / v_j >= p``; unbought means ``<= p``.
    """
    N = grid_size(delta)
    n = bundle_at_ones.shape[0]
    resolution = Fraction(1, 2 * N * N)
    ratios: dict[int, Fraction] = {}
    for k in range(n):
        if k == j or _bought(bundle_at_ones, k):
            continue

        def probe(price: Fraction, k: int = k) -> bool:
            p = np.ones(n)
            p[k] = float(price)
            return _bought(oracle(p), k)

        lo, hi = _bisect(probe, Fraction(1, N), Fraction(1), resolution, linear)
        ratios[k] = snap_ratio(lo, hi, N)
    return ratios


def alpha_prices(
    n: int, known: dict[int, Fraction], alpha: Fraction, floor: float = 0.0
) -> FloatArray:
    """Price 1 for unlearned goods, ``max(alpha * s_i, floor)`` for learned ones."""
    p = np.ones(n)
    for i, si in known.items():
        p[i] = max(float(alpha * si), floor)
    return p


def learn_upper_ratios(
    j: int,
    known: dict[int, Fraction],
    oracle: Oracle,
    delta: float,
    budget: float,
    bundle_at_ones: FloatArray,
    linear: bool = False,
) -> dict[int, Fraction | None]:
    """Ratios ``s_k`` for goods bought at all-ones prices, least preferred first.

    ``known`` maps already-learned goods to ``s_i = v_i / v_min``.  With
    unlearned goods at price 1 and learned goods at ``alpha * s_i``, some
    unlearned good is left unbought exactly for ``alpha`` in
    ``[alpha_low, v_min / v_k]``, where ``alpha_low`` is the smallest
    ``alpha`` at which the learned goods plus the other unlearned goods can
    use up the budget.  Learned prices are clamped at ``delta``; the oracle
    must break ties toward the cheaper good.  If the consumer still buys every unlearned good at
    ``alpha_low`` they are bought at any prices and are returned as ``None``.
    """
    N = grid_size(delta)
    n = bundle_at_ones.shape[0]
    resolution = Fraction(1) if N == 1 else Fraction(1, 2 * N * (N - 1))
    B = Fraction(budget)
    known = dict(known)
    pending = {i for i in range(n) if _bought(bundle_at_ones, i) and i != j and i not in known}
    out: dict[int, Fraction | None] = {}
    while pending:
        total = sum(known.values(), Fraction(0))
        alpha_max = 1 / max(known.values())
        alpha_low = (B - (len(pending) - 1)) / total
        # Every switch point is >= delta, so probing just below delta (with
        # the cheapest learned goods clamped to delta) is still on the
        # squeezing side and avoids a tie at exactly alpha = delta.
        lo = max(alpha_low, Fraction(1, N) - resolution)
        if lo >= alpha_max:
            break
        squeezed: list[set[int]] = []

        def probe(alpha: Fraction) -> bool:
            assert alpha >= Fraction(1, N) - resolution, "clamping above the switch range"
            x = oracle(alpha_prices(n, known, alpha, floor=delta))
            out_now = {i for i in pending if not _bought(x, i)}
            if out_now:
                squeezed.append(out_now)
            return bool(out_now)

        if not probe(lo):
            break
        lo, hi = _bisect(probe, lo, alpha_max, resolution, linear)
        alpha_star = snap_ratio(lo, hi, N)
        for i in squeezed[-1]:
            out[i] = 1 / alpha_star
            known[i] = 1 / alpha_star
        pending -= squeezed[-1]
    for i in pending:
        out[i] = None
    return out


def learn_valuations(
    oracle: Oracle,
    delta: float,
    n: int | None = None,
    budget: float | None = None,
    linear: bool = False,
) -> LearnedRatios:
    """Recover ``v_i / v_min`` for every good that is not always purchased.

    ``oracle`` maps a price vector to the purchased bundle.  ``n`` and
    ``budget`` default to the oracle's ``n`` and ``B`` attributes.
    """
    n = n if n is not None else oracle.n  # type: ignore[attr-defined]
    budget = budget if budget is not None else oracle.B  # type: ignore[attr-defined]
    if budget < MIN_BUDGET:
        raise ValueError(f"budget {budget} is below {MIN_BUDGET}; purchases are unobservable")
    q = oracle if isinstance(oracle, QueryOracle) else QueryOracle(oracle)
    j = find_pivot(q, n, delta)
    if j is ALL_PURCHASED:
        return LearnedRatios(s=(None,) * n, j=None, log=q.log)
    x0 = q.log.queries[0][1]
    rel = learn_lower_ratios(j, q, delta, x0, linear)
    rel[j] = Fraction(1)
    anchor = min(rel.values())
    known = {k: r / anchor for k, r in rel.items()}
    upper = learn_upper_ratios(j, known, q, delta, budget, x0, linear)
    s = tuple(known.get(i, upper.get(i)) for i in range(n))
    return LearnedRatios(s=s, j=j, log=q.log)
