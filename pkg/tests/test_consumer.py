import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from revpref.consumer import (
    Consumer,
    TieBreak,
    best_bundle,
    greedy_bundle,
    greedy_bundles,
    indifference_groups,
    is_uniquely_specified,
    merchant_best_bundle,
    straddling_group,
)
from revpref.core import MarketInstance

from conftest import instances, price_vectors
from oracles import grid_bundle_max, lp_utility_max


def inst(v, c=None, B=1.0, delta=0.1):
    return MarketInstance(v=v, c=c if c is not None else [0.0] * len(v), B=B, delta=delta)


@pytest.mark.parametrize(
    "v, p, B, expected",
    [
        ((0.9, 0.6, 0.3), (1, 1, 1), 1.5, (1, 0.5, 0)),
        ((0.5, 0.5), (1, 0.5), 1.0, (0.5, 1)),
        ((0.4, 0.4), (1, 1), 1.0, (1, 0)),
    ],
)
def test_best_bundle_examples(v, p, B, expected):
    x = best_bundle(inst(v, B=B), p, TieBreak.LEXICOGRAPHIC)
    np.testing.assert_allclose(x, expected, atol=1e-12)


def test_everything_bought_when_budget_covers_all():
    x = best_bundle(inst((0.3, 0.7, 1.0), B=3.0), (1, 1, 1))
    np.testing.assert_array_equal(x, 1.0)


def test_tie_break_policies_differ_only_inside_groups():
    m = inst((0.5, 0.25), c=(0.9, 0.1), B=1.0, delta=0.25)
    p = np.array([1.0, 0.5])
    np.testing.assert_allclose(best_bundle(m, p, TieBreak.LEXICOGRAPHIC), (1, 0))
    np.testing.assert_allclose(best_bundle(m, p, TieBreak.CHEAPEST_FIRST), (0.5, 1))
    np.testing.assert_allclose(best_bundle(m, p, TieBreak.MERCHANT_BEST), (0.5, 1))


@pytest.mark.parametrize(
    "v, p, c, B, x, profit",
    [
        ((0.5, 0.5), (1, 1), (0.3, 0.1), 1.5, (0.5, 1), 1.25),
        ((1.0, 0.5), (1, 1), (0.1, 0.2), 1.0, (1, 0), 0.9),
    ],
)
def test_merchant_best_examples(v, p, c, B, x, profit):
    got, prof = merchant_best_bundle(inst(v, c=c, B=B), p)
    np.testing.assert_allclose(got, x, atol=1e-12)
    assert prof == pytest.approx(profit, abs=1e-12)


@pytest.mark.parametrize(
    "v, B, unique",
    [((1.0, 0.5), 1.0, True), ((0.5, 0.5), 1.0, False), ((0.9, 0.6, 0.3), 1.5, True)],
)
def test_uniqueness_examples(v, B, unique):
    assert is_uniquely_specified(inst(v, B=B), np.ones(len(v))) is unique


def test_straddling_group_found():
    assert straddling_group((0.5, 0.5, 0.1), (1, 1, 1), 1.0) == [0, 1]
    assert straddling_group((0.5, 0.5, 0.1), (1, 1, 1), 2.5) is None


def test_indifference_groups_use_relative_tolerance():
    groups = indifference_groups((0.3, 0.1, 0.2), (0.3, 0.1, 0.1))
    assert groups == [[2], [0, 1]]


def test_consumer_wraps_instance(two_goods):
    c = Consumer(two_goods, TieBreak.CHEAPEST_FIRST)
    assert c.n == 2 and c.B == 1.0
    np.testing.assert_allclose(c(np.ones(2)), (1, 0))


@settings(max_examples=200, deadline=None)
@given(instances(), st.data())
def test_bundle_is_optimal_saturating_and_has_one_fractional_good(m, data):
    p = data.draw(price_vectors(m.n))
    for policy in TieBreak:
        x = best_bundle(m, p, policy)
        assert np.all((x >= 0) & (x <= 1))
        assert np.sum((x > 1e-9) & (x < 1 - 1e-9)) <= 1
        assert x @ p == pytest.approx(min(m.B, p.sum()), abs=1e-9)
        assert x @ m.v >= lp_utility_max(m.v, p, m.B) - 1e-9


@settings(max_examples=60, deadline=None)
@given(instances(n_max=3, deltas=(0.25, 0.2)), st.data())
def test_bundle_beats_grid_bundles(m, data):
    p = data.draw(price_vectors(m.n))
    x = best_bundle(m, p)
    assert x @ m.v >= grid_bundle_max(m.v, p, m.B) - 1e-6


@given(instances(), st.floats(0.01, 100.0), st.data())
def test_bundle_is_scale_invariant(m, lam, data):
    p = data.draw(price_vectors(m.n))
    for policy in TieBreak:
        a = greedy_bundle(m.v, p, m.B, policy, m.c)
        b = greedy_bundle(lam * m.v, p, m.B, policy, m.c)
        np.testing.assert_allclose(a, b, atol=1e-9)


@given(instances(), st.data())
def test_merchant_best_dominates_every_policy(m, data):
    p = data.draw(price_vectors(m.n))
    _, best = merchant_best_bundle(m, p)
    for policy in TieBreak:
        x = best_bundle(m, p, policy)
        prof = float(x @ (p - m.c))
        assert best >= prof - 1e-9
        if is_uniquely_specified(m, p):
            assert best == pytest.approx(prof, abs=1e-9)


@given(instances(deltas=(0.25, 0.2)), st.data())
def test_batched_bundles_match_scalar(m, data):
    N = m.grid
    P = np.array(data.draw(st.lists(st.lists(st.integers(1, N), min_size=m.n, max_size=m.n), min_size=1, max_size=8))) / N
    for policy in TieBreak:
        X = greedy_bundles(m.v, P, m.B, policy, m.c, decimals=9)
        for p, x in zip(P, X):
            np.testing.assert_allclose(x, greedy_bundle(m.v, p, m.B, policy, m.c), atol=1e-12)
