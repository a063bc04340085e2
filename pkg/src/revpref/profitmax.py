"""The online merchant: learn the valuations, then post near-optimal prices.

Every learning query is a round in which the merchant earns whatever the
consumer's purchase happens to yield.  Once the ratios are known, goods the
consumer buys at any price are priced at 1 and the rest are priced by
:func:`revpref.optprice.optimal_prices_for` on the learned ratios, with the
budget left over after the always-bought goods.  Those prices are then
posted for every remaining round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .consumer import Consumer, TieBreak, greedy_bundle
from .core import ATOL, FloatArray, MarketInstance, validate_instance
from .learnval import LearnedRatios, QueryOracle, learn_valuations
from .optprice import candidate_prices, optimal_prices_for

LEARN = "learn"
EXPLOIT = "exploit"


@dataclass(frozen=True)
class Round:
    t: int
    prices: FloatArray
    bundle: FloatArray
    profit: float
    phase: str


@dataclass
class RegretLedger:
    """Round-by-round record of one merchant run.

    ``opt_reference`` is the per-round profit the merchant is compared to.
    ``complete`` is false when the horizon ended before learning finished.
    """

    opt_reference: float
    eps: float
    rounds: list[Round] = field(default_factory=list)
    learning_rounds: int = 0
    exploit_prices: FloatArray | None = None
    learned: LearnedRatios | None = None
    complete: bool = True

    @property
    def T(self) -> int:
        return len(self.rounds)

    @property
    def profits(self) -> FloatArray:
        return np.array([r.profit for r in self.rounds])

    @property
    def cumulative_regret(self) -> float:
        return self.T * self.opt_reference - float(self.profits.sum())

    @property
    def per_round_regret(self) -> float:
        return regret_at(self, self.T)

    @property
    def exploit_profit(self) -> float | None:
        for r in self.rounds:
            if r.phase == EXPLOIT:
                return r.profit
        return None


def default_eps(n: int, T: int, delta: float) -> float:
    """``(n^2 / T) * ln((1 - delta) / delta^2)``, capped below ``n``."""
    if delta >= 1.0:
        return min(n / 2, n * n / T)
    return min(n / 2, n * n / T * math.log((1.0 - delta) / delta**2))


def exploit_prices(
    learned: LearnedRatios, c: FloatArray, B: float, delta: float, eps: float
) -> FloatArray:
    """Prices posted after learning.

    Always-bought goods cost 1.  The learnable goods are priced on their
    normalized ratios with the budget that remains once the always-bought
    goods are paid for.
    """
    n = len(learned.s)
    p = np.ones(n)
    idx = list(learned.learnable)
    if not idx:
        return p
    residual = B - (n - len(idx))
    if residual <= ATOL:
        return p
    s = np.array([float(learned.s[i]) for i in idx])
    res = optimal_prices_for(s / s.max(), c[idx], residual, delta, min(eps, len(idx) / 2))
    p[idx] = res.prices
    return p


def run_profit_max(
    inst: MarketInstance,
    T: int,
    eps: float | None = None,
    opt_reference: float | None = None,
    policy: TieBreak = TieBreak.CHEAPEST_FIRST,
) -> RegretLedger:
    """Simulate ``T`` rounds of learn-then-exploit against ``inst``'s consumer.

    The merchant sees ``c`` and ``B`` but reaches ``v`` only through the
    consumer's purchases.  ``opt_reference`` defaults to the best candidate
    profit on the true instance, which is the optimal per-round profit.
    """
    validate_instance(inst)
    if T < 0:
        raise ValueError("T must be non-negative")
    if eps is None:
        eps = default_eps(inst.n, max(T, 1), inst.delta)
    if opt_reference is None:
        opt_reference = max(cd.profit for cd in candidate_prices(inst))
    ledger = RegretLedger(opt_reference=float(opt_reference), eps=float(eps))
    consumer = Consumer(inst, policy)
    oracle = QueryOracle(consumer)
    learned = learn_valuations(oracle, inst.delta, n=inst.n, budget=inst.B)
    ledger.learned = learned
    ledger.learning_rounds = learned.queries
    for t, (p, x) in enumerate(learned.log.queries[:T]):
        ledger.rounds.append(Round(t, p, x, float(x @ (p - inst.c)), LEARN))
    if T < learned.queries:
        ledger.complete = False
        return ledger
    p_hat = exploit_prices(learned, inst.c, inst.B, inst.delta, eps)
    p_hat.setflags(write=False)
    ledger.exploit_prices = p_hat
    x_hat = greedy_bundle(inst.v, p_hat, inst.B, policy, inst.c)
    x_hat.setflags(write=False)
    gain = float(x_hat @ (p_hat - inst.c))
    for t in range(learned.queries, T):
        ledger.rounds.append(Round(t, p_hat, x_hat, gain, EXPLOIT))
    return ledger


def regret_at(ledger: RegretLedger, T: int) -> float:
    """Per-round regret over the first ``T`` rounds."""
    if not 0 < T <= ledger.T:
        raise ValueError(f"checkpoint {T} outside 1..{ledger.T}")
    return ledger.opt_reference - float(np.mean(ledger.profits[:T]))


def regret_curve(ledger: RegretLedger, checkpoints: Iterable[int]) -> list[tuple[int, float]]:
    """Per-round regret at each checkpoint prefix."""
    return [(int(T), regret_at(ledger, int(T))) for T in checkpoints]
