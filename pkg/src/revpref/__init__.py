"""Learning from revealed preferences of a budgeted linear-utility consumer."""

from .consumer import Consumer, TieBreak, best_bundle, greedy_bundle, merchant_best_bundle
from .core import MarketInstance, load_instance, validate_instance
from .exog import run_exog
from .learnval import learn_valuations
from .optprice import candidate_prices, optimal_prices
from .profitmax import regret_curve, run_profit_max

__all__ = [
    "Consumer",
    "MarketInstance",
    "TieBreak",
    "best_bundle",
    "candidate_prices",
    "greedy_bundle",
    "learn_valuations",
    "load_instance",
    "merchant_best_bundle",
    "optimal_prices",
    "regret_curve",
    "run_exog",
    "run_profit_max",
    "validate_instance",
]
