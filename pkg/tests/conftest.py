import numpy as np
import pytest
from hypothesis import strategies as st

from revpref.core import MarketInstance


@pytest.fixture
def two_goods():
    return MarketInstance(v=[1.0, 0.5], c=[0.1, 0.2], B=1.0, delta=0.5)


@st.composite
def instances(draw, n_max=3, deltas=(0.5, 0.25, 0.2, 0.1), budget_max=None):
    n = draw(st.integers(1, n_max))
    delta = draw(st.sampled_from(deltas))
    N = round(1 / delta)
    levels = draw(st.lists(st.integers(1, N), min_size=n, max_size=n))
    c = draw(st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n))
    hi = n if budget_max is None else budget_max
    B = draw(st.floats(0.0, hi))
    return MarketInstance(v=[k / N for k in levels], c=c, B=B, delta=1.0 / N)


@st.composite
def price_vectors(draw, n, lo=0.05):
    return np.array(draw(st.lists(st.floats(lo, 1.0), min_size=n, max_size=n)))
