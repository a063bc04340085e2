import numpy as np
import pytest
from hypothesis import assume, given, settings

from revpref.consumer import TieBreak, greedy_bundle
from revpref.core import MarketInstance
from revpref.learnval import MIN_BUDGET
from revpref.optprice import candidate_prices, optimal_prices_for
from revpref.profitmax import (
    EXPLOIT,
    LEARN,
    default_eps,
    exploit_prices,
    regret_at,
    regret_curve,
    run_profit_max,
)

from conftest import instances
from oracles import always_full


def opt(m):
    return max(cd.profit for cd in candidate_prices(m))


def test_reference_instance(two_goods):
    led = run_profit_max(two_goods, 1000, eps=0.01)
    assert led.complete
    assert led.learning_rounds == 4
    assert [r.phase for r in led.rounds[:5]] == [LEARN] * 4 + [EXPLOIT]
    assert led.exploit_profit >= 0.89
    assert led.opt_reference == pytest.approx(0.9)
    assert led.per_round_regret <= 0.01 + led.learning_rounds * two_goods.n / 1000


def test_horizon_equal_to_learning_length(two_goods):
    led = run_profit_max(two_goods, 4, eps=0.01)
    assert led.complete and led.exploit_profit is None
    learn_mean = np.mean([r.profit for r in led.rounds])
    assert led.per_round_regret == pytest.approx(0.9 - learn_mean, abs=1e-15)


def test_short_horizon_is_flagged_incomplete(two_goods):
    led = run_profit_max(two_goods, 2, eps=0.01)
    assert not led.complete
    assert led.T == 2 and led.exploit_prices is None


def test_everything_always_bought():
    m = MarketInstance(v=[1.0, 0.5], c=[0.1, 0.2], B=2.0, delta=0.5)
    led = run_profit_max(m, 50, eps=0.01)
    np.testing.assert_array_equal(led.exploit_prices, 1.0)
    assert led.exploit_profit == pytest.approx(np.sum(1 - m.c))


def test_regret_curve(two_goods):
    led = run_profit_max(two_goods, 200, eps=0.01)
    assert regret_curve(led, []) == []
    curve = dict(regret_curve(led, [2, 4, 100, 200]))
    assert curve[200] == pytest.approx(led.per_round_regret)
    # inside the learning phase regret is at most n
    assert curve[2] <= two_goods.n
    with pytest.raises(ValueError):
        regret_at(led, 201)


def test_exploit_excess_halves_with_horizon(two_goods):
    # beyond the learning phase regret is (learning loss) / T + (exploit gap)
    gap = 0.9 - run_profit_max(two_goods, 10, eps=0.01).exploit_profit
    led = run_profit_max(two_goods, 4000, eps=0.01)
    for T in (250, 500, 1000, 2000):
        ratio = (regret_at(led, T) - gap) / (regret_at(led, 2 * T) - gap)
        assert ratio == pytest.approx(2.0, rel=1e-6)


def test_default_eps_shrinks_with_horizon():
    assert default_eps(2, 1000, 0.5) < default_eps(2, 100, 0.5)
    assert default_eps(2, 1, 0.1) == 1.0


@settings(max_examples=150, deadline=None)
@given(instances(n_max=3, deltas=(0.25, 0.2)))
def test_exploit_is_near_optimal_when_always_bought_goods_are_bought_in_full(m):
    assume(m.B >= MIN_BUDGET)
    led = run_profit_max(m, 100, eps=0.01)
    assume(all(always_full(m.v, m.B, i) for i in led.learned.unlearnable))
    assert led.exploit_profit >= opt(m) - 0.01 - 1e-9
    # exploit prices are fixed, so every exploit round earns the same
    prof = {r.profit for r in led.rounds if r.phase == EXPLOIT}
    assert len(prof) <= 1


@settings(max_examples=100, deadline=None)
@given(instances(n_max=3, deltas=(0.25, 0.2)))
def test_cumulative_regret_accounting(m):
    assume(m.B >= MIN_BUDGET)
    led = run_profit_max(m, 300, eps=0.01)
    assert led.cumulative_regret <= led.learning_rounds * m.n + led.T * 0.01 + 1e-9 + led.T * max(
        0.0, opt(m) - 0.01 - (led.exploit_profit or opt(m))
    )


def test_always_bought_good_need_not_be_bought_in_full():
    # good 2 can never be priced out, yet the best prices sell only part of it
    m = MarketInstance(v=[0.5, 0.5, 0.75], c=[0.088, 0.169, 0.513], B=1.511, delta=0.25)
    led = run_profit_max(m, 100, eps=0.01)
    assert led.learned.unlearnable == {2}
    assert not always_full(m.v, m.B, 2)
    best = max(candidate_prices(m), key=lambda cd: cd.profit)
    assert best.bundle[2] < 1
    assert led.exploit_profit < best.profit - 0.1


def test_fabricated_ratio_for_always_bought_good_does_not_change_exploit_profit():
    m = MarketInstance(v=[1.0, 0.2, 0.2, 0.2], c=[0.3, 0.2, 0.1, 0.4], B=1.7, delta=0.2)
    assert always_full(m.v, m.B, 0)
    led = run_profit_max(m, 100, eps=0.01)
    assert led.learned.unlearnable == {0}
    base = led.exploit_profit
    assert base >= opt(m) - 0.01
    for fake in (1.0, 2.5, 5.0):
        s = np.array([fake, 1.0, 1.0, 1.0])
        res = optimal_prices_for(s / s.max(), m.c, m.B, m.delta, 0.01)
        p = res.prices.copy()
        p[0] = 1.0
        x = greedy_bundle(m.v, p, m.B, TieBreak.LEXICOGRAPHIC)
        assert float(x @ (p - m.c)) == pytest.approx(base, abs=0.01)
