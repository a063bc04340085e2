"""The consumer's best response: a greedy fractional knapsack.

Goods are bought in descending bang-per-buck order until the budget runs
out.  Goods whose ratios agree to a relative tolerance form an indifference
group; the :class:`TieBreak` policy fixes the order inside a group, which is
the only freedom the consumer has.
"""

from __future__ import annotations

import enum
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .core import (
    RATIO_RTOL,
    Bundle,
    FloatArray,
    MarketInstance,
    PriceVector,
    bang_per_buck,
    check_prices,
)

# Budget remainders below this are treated as exhausted.
FILL_TOL = 1e-12


class TieBreak(enum.Enum):
    """How the consumer orders goods with equal bang per buck.

    ``LEXICOGRAPHIC`` buys lower indices first, ``CHEAPEST_FIRST`` buys the
    lower price first (then lower index), and ``MERCHANT_BEST`` buys the
    lowest cost-per-currency ``c_i / p_i`` first, which is the member of the
    indifference set the merchant prefers.
    """

    LEXICOGRAPHIC = "lexicographic"
    CHEAPEST_FIRST = "cheapest_first"
    MERCHANT_BEST = "merchant_best"


def indifference_groups(v: ArrayLike, p: ArrayLike) -> list[list[int]]:
    """Partition goods into runs of equal ratio, in descending ratio order."""
    r = bang_per_buck(v, p)
    order = np.argsort(-r, kind="stable")
    groups: list[list[int]] = []
    prev = None
    for i in order:
        ri = r[i]
        if prev is not None and abs(ri - prev) <= RATIO_RTOL * max(abs(ri), abs(prev)):
            groups[-1].append(int(i))
        else:
            groups.append([int(i)])
        prev = ri
    return groups


def purchase_order(
    v: ArrayLike,
    p: ArrayLike,
    policy: TieBreak = TieBreak.LEXICOGRAPHIC,
    c: ArrayLike | None = None,
) -> list[int]:
    """Full greedy purchase order under ``policy``."""
    p = np.asarray(p, dtype=np.float64)
    if policy is TieBreak.LEXICOGRAPHIC:
        key: Callable[[int], tuple] = lambda i: (i,)
    elif policy is TieBreak.CHEAPEST_FIRST:
        key = lambda i: (p[i], i)
    elif policy is TieBreak.MERCHANT_BEST:
        if c is None:
            raise ValueError("MERCHANT_BEST tie-breaking needs a cost vector")
        cp = np.asarray(c, dtype=np.float64) / p
        key = lambda i: (cp[i], i)
    else:  # pragma: no cover
        raise ValueError(f"unknown policy {policy!r}")
    order: list[int] = []
    for group in indifference_groups(v, p):
        order.extend(sorted(group, key=key))
    return order


def fill_in_order(order: Sequence[int], p: ArrayLike, B: float) -> Bundle:
    """Buy goods in ``order`` until ``B`` is spent."""
    p = np.asarray(p, dtype=np.float64)
    x = np.zeros(p.shape[0])
    rem = float(B)
    for i in order:
        if rem <= FILL_TOL:
            break
        if p[i] <= rem + FILL_TOL:
            x[i] = 1.0
            rem = max(rem - p[i], 0.0)
        else:
            x[i] = rem / p[i]
            rem = 0.0
    return x


def greedy_bundle(
    v: ArrayLike,
    p: ArrayLike,
    B: float,
    policy: TieBreak = TieBreak.LEXICOGRAPHIC,
    c: ArrayLike | None = None,
) -> Bundle:
    """Utility-maximizing bundle for any non-negative valuation vector."""
    return fill_in_order(purchase_order(v, p, policy, c), p, B)


def greedy_bundles(
    v: ArrayLike,
    P: ArrayLike,
    B: float,
    policy: TieBreak = TieBreak.LEXICOGRAPHIC,
    c: ArrayLike | None = None,
    decimals: int | None = None,
) -> FloatArray:
    """Row-wise :func:`greedy_bundle` for a stack of price vectors ``P``.

    Ratios are compared exactly unless ``decimals`` is given, in which case
    they are rounded first so that equal grid ratios tie reliably.
    """
    v = np.asarray(v, dtype=np.float64)
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    M, n = P.shape
    r = v / P
    if decimals is not None:
        r = np.round(r, decimals)
    if policy is TieBreak.LEXICOGRAPHIC:
        second = np.zeros_like(P)
    elif policy is TieBreak.CHEAPEST_FIRST:
        second = P
    elif policy is TieBreak.MERCHANT_BEST:
        if c is None:
            raise ValueError("MERCHANT_BEST tie-breaking needs a cost vector")
        second = np.asarray(c, dtype=np.float64) / P
    else:  # pragma: no cover
        raise ValueError(f"unknown policy {policy!r}")
    rows = np.repeat(np.arange(M), n)
    flat = np.lexsort((second.ravel(), -r.ravel(), rows))
    cols = flat.reshape(M, n) - (np.arange(M) * n)[:, None]
    ps = np.take_along_axis(P, cols, axis=1)
    before = np.cumsum(ps, axis=1) - ps
    xs = np.clip((B - before) / ps, 0.0, 1.0)
    xs[(B - before) <= FILL_TOL] = 0.0
    x = np.empty_like(xs)
    np.put_along_axis(x, cols, xs, axis=1)
    return x


def best_bundle(
    inst: MarketInstance, p: ArrayLike, policy: TieBreak = TieBreak.LEXICOGRAPHIC
) -> Bundle:
    """The consumer's response X(u, p, B) selected by ``policy``."""
    p = check_prices(p, inst.n)
    c = inst.c if policy is TieBreak.MERCHANT_BEST else None
    return greedy_bundle(inst.v, p, inst.B, policy, c)


def merchant_best(v: ArrayLike, p: ArrayLike, c: ArrayLike, B: float) -> tuple[Bundle, float]:
    """Array-level :func:`merchant_best_bundle`."""
    p = np.asarray(p, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    x = greedy_bundle(v, p, B, TieBreak.MERCHANT_BEST, c)
    return x, float(x @ (p - c))


def merchant_best_bundle(inst: MarketInstance, p: ArrayLike) -> tuple[Bundle, float]:
    """Member of the consumer's indifference set with the highest profit.

    When an indifference run straddles the remaining budget the merchant
    fills it by ascending ``c_i / p_i`` (a min-cost fractional knapsack);
    this is the greedy order with :attr:`TieBreak.MERCHANT_BEST`.
    """
    p = check_prices(p, inst.n)
    return merchant_best(inst.v, p, inst.c, inst.B)


def unique_response(v: ArrayLike, p: ArrayLike, B: float) -> bool:
    """True iff the utility-maximizing bundle is a singleton."""
    p = np.asarray(p, dtype=np.float64)
    rem = float(B)
    for group in indifference_groups(v, p):
        if rem <= FILL_TOL:
            return True
        cost = float(p[group].sum())
        if cost <= rem + FILL_TOL:
            rem = max(rem - cost, 0.0)
            continue
        return len(group) == 1
    return True


def is_uniquely_specified(inst: MarketInstance, p: ArrayLike) -> bool:
    """Whether prices ``p`` leave the consumer exactly one optimal bundle."""
    return unique_response(inst.v, check_prices(p, inst.n), inst.B)


def straddling_group(v: ArrayLike, p: ArrayLike, B: float) -> list[int] | None:
    """The indifference group that makes the response ambiguous, if any."""
    p = np.asarray(p, dtype=np.float64)
    rem = float(B)
    for group in indifference_groups(v, p):
        if rem <= FILL_TOL:
            return None
        cost = float(p[group].sum())
        if cost <= rem + FILL_TOL:
            rem = max(rem - cost, 0.0)
            continue
        return group if len(group) > 1 else None
    return None


class Consumer:
    """Price-query oracle wrapping a market instance.

    Calling the consumer with a price vector returns the bundle it buys.
    Used as the black box queried by the learners.
    """

    def __init__(self, inst: MarketInstance, policy: TieBreak = TieBreak.LEXICOGRAPHIC):
        self.inst = inst
        self.policy = policy

    @property
    def n(self) -> int:
        return self.inst.n

    @property
    def B(self) -> float:
        return self.inst.B

    def __call__(self, p: PriceVector) -> FloatArray:
        return best_bundle(self.inst, p, self.policy)
