"""Profit-maximizing prices for a consumer with known valuations.

For every pivot good ``k`` the candidate price vector sets
``p_i = min(v_i / v_k, 1)``; some candidate, paired with the bundle the
merchant likes best among the consumer's optimal bundles, attains the optimal
profit.  The winning candidate is then perturbed so that the consumer's
response becomes unique while losing at most ``eps`` profit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from .consumer import (
    TieBreak,
    greedy_bundle,
    greedy_bundles,
    merchant_best,
    purchase_order,
    straddling_group,
    unique_response,
)
from .core import ATOL, FloatArray, MarketInstance, validate_instance

# Ties between candidate profits.
PROFIT_TOL = 1e-12


@dataclass(frozen=True)
class CandidatePricing:
    """Candidate ``p^(k)`` with the merchant-preferred response and its profit."""

    k: int
    prices: FloatArray
    bundle: FloatArray
    profit: float


@dataclass(frozen=True)
class PerturbedPricing:
    """Output of :func:`optimal_prices`.

    ``bundle`` is the consumer's unique response at ``prices`` and
    ``profit_bound`` is the certified lower bound ``max_k Profit(k) - eps``.
    """

    prices: FloatArray
    bundle: FloatArray
    profit: float
    profit_bound: float
    k: int
    eps: float
    step: float
    candidates: list[CandidatePricing] = field(repr=False)


def candidate_vector(v: ArrayLike, k: int) -> FloatArray:
    v = np.asarray(v, dtype=np.float64)
    return np.minimum(v / v[k], 1.0)


def price_candidates(v: ArrayLike, c: ArrayLike, B: float) -> list[CandidatePricing]:
    """All ``n`` candidates for arbitrary positive valuations."""
    v = np.asarray(v, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    out = []
    for k in range(v.shape[0]):
        p = candidate_vector(v, k)
        x, prof = merchant_best(v, p, c, B)
        p.setflags(write=False)
        x.setflags(write=False)
        out.append(CandidatePricing(k=k, prices=p, bundle=x, profit=prof))
    return out


def candidate_prices(inst: MarketInstance) -> list[CandidatePricing]:
    """One :class:`CandidatePricing` per pivot good, in pivot order."""
    validate_instance(inst)
    return price_candidates(inst.v, inst.c, inst.B)


def best_candidate(cands: list[CandidatePricing]) -> CandidatePricing:
    """Highest-profit candidate; ties go to the smallest pivot."""
    top = max(cd.profit for cd in cands)
    return next(cd for cd in cands if cd.profit >= top - PROFIT_TOL)


def perturb_prices(
    v: ArrayLike,
    c: ArrayLike,
    B: float,
    p_star: ArrayLike,
    x_star: ArrayLike,
    delta: float,
    eps: float,
) -> tuple[FloatArray, float]:
    """Perturb ``p_star`` so the consumer's response is unique.

    Unbought goods go to price 1, fully bought goods drop by
    ``step = delta * eps / n`` and the fractional good by ``delta * step``.
    If an indifference group still straddles the budget (possible with
    repeated valuations), the merchant's first choice inside it is made
    strictly preferable by a further ``delta * step / n``.

    Returns the new prices and ``step``.
    """
    v = np.asarray(v, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    n = v.shape[0]
    step = delta * eps / n
    p = np.array(p_star, dtype=np.float64)
    for i in range(n):
        if x_star[i] <= ATOL:
            p[i] = 1.0
        elif x_star[i] >= 1.0 - ATOL:
            p[i] -= step
        else:
            p[i] -= delta * step
    nudge = delta * step / n
    for _ in range(n):
        group = straddling_group(v, p, B)
        if group is None:
            break
        first = purchase_order(v[group], p[group], TieBreak.MERCHANT_BEST, c[group])[0]
        p[group[first]] -= nudge
    return p, step


def optimal_prices_for(
    v: ArrayLike, c: ArrayLike, B: float, delta: float, eps: float
) -> PerturbedPricing:
    """Array-level :func:`optimal_prices`; ``v`` need not lie on the grid.

    Valuations must be positive with ``max(v) / min(v) <= 1 / delta``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    v = np.asarray(v, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    n = v.shape[0]
    if eps >= n:
        raise ValueError(f"eps={eps} must be smaller than n={n}")
    cands = price_candidates(v, c, B)
    best = best_candidate(cands)
    p_hat, step = perturb_prices(v, c, B, best.prices, best.bundle, delta, eps)
    if np.any(p_hat < delta - delta * eps - ATOL) or np.any(p_hat <= 0):
        raise RuntimeError(f"perturbed prices fell below the floor: {p_hat.tolist()}")
    if not unique_response(v, p_hat, B):
        raise RuntimeError(f"response at {p_hat.tolist()} is not unique")
    x_hat = greedy_bundle(v, p_hat, B)
    realized = float(x_hat @ (p_hat - c))
    bound = best.profit - eps
    if realized < bound - ATOL:
        raise RuntimeError(f"perturbed profit {realized} below bound {bound}")
    p_hat.setflags(write=False)
    x_hat.setflags(write=False)
    return PerturbedPricing(
        prices=p_hat,
        bundle=x_hat,
        profit=realized,
        profit_bound=bound,
        k=best.k,
        eps=float(eps),
        step=step,
        candidates=cands,
    )


def optimal_prices(inst: MarketInstance, eps: float) -> PerturbedPricing:
    """Near-optimal prices under which the consumer's choice is unique.

    The realized profit is at least ``max_k Profit(k) - eps``.
    """
    validate_instance(inst)
    return optimal_prices_for(inst.v, inst.c, inst.B, inst.delta, eps)


# -- exhaustive oracle ------------------------------------------------------


def price_grid(delta: float, resolution: float) -> FloatArray:
    """Points ``delta, delta + resolution, ...`` up to 1, with 1 included."""
    count = int(np.floor((1.0 - delta) / resolution + 1e-9)) + 1
    pts = delta + resolution * np.arange(count)
    if pts[-1] < 1.0 - 1e-12:
        pts = np.append(pts, 1.0)
    return np.minimum(pts, 1.0)


def merchant_profits(v: ArrayLike, c: ArrayLike, B: float, P: ArrayLike) -> FloatArray:
    """Merchant-best profit at each row of ``P``, vectorized.

    Ratios are compared after rounding to 9 decimals, which separates all
    distinct ratios of grid valuations and grid prices.
    """
    P = np.asarray(P, dtype=np.float64)
    x = greedy_bundles(v, P, B, TieBreak.MERCHANT_BEST, c, decimals=9)
    return (x * (P - c)).sum(axis=1)


def brute_force_opt(inst: MarketInstance, resolution: float) -> tuple[FloatArray, float]:
    """Best merchant-best profit over the price grid ``{delta, ..., 1}^n``.

    Independent of the candidate construction; used as the optimality
    oracle in tests.  Among equally good grid points the one that comes
    last in lexicographic order (highest prices) is returned.
    """
    validate_instance(inst)
    if inst.n > 3:
        raise ValueError(f"brute_force_opt supports n <= 3, got n={inst.n}")
    pts = price_grid(inst.delta, resolution)
    P = np.array(list(itertools.product(pts, repeat=inst.n)))
    prof = merchant_profits(inst.v, inst.c, inst.B, P)
    top = prof.max()
    idx = int(np.flatnonzero(prof >= top - PROFIT_TOL)[-1])
    return P[idx].copy(), float(prof[idx])
