"""Shared domain types for the budgeted linear-utility market.

A market is described by a valuation vector ``v`` (utility per unit of each
good), a production cost vector ``c``, a budget ``B`` and the valuation
discretization ``delta``.  Prices and bundles are plain float arrays; the
helpers here validate them at module boundaries.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

# Absolute tolerance for spend / bundle equality comparisons.
ATOL = 1e-9
# Relative tolerance under which two bang-per-buck ratios count as equal.
RATIO_RTOL = 1e-12

FloatArray = NDArray[np.float64]
PriceVector = FloatArray
Bundle = FloatArray
BangPerBuck = FloatArray


class InvalidInstance(ValueError):
    """Raised when a market instance violates one of its invariants."""


class InvalidPrices(ValueError):
    """Raised when a price vector is outside (0, 1] or has the wrong arity."""


def _frozen(x: ArrayLike) -> FloatArray:
    arr = np.array(x, dtype=np.float64).reshape(-1)
    arr.setflags(write=False)
    return arr


def grid_size(delta: float) -> int:
    """Return ``1/delta`` as an integer, or raise if it is not one."""
    if not (0.0 < delta <= 1.0) or not math.isfinite(delta):
        raise InvalidInstance(f"δ={delta!r} outside (0, 1]")
    inv = 1.0 / delta
    N = int(round(inv))
    if abs(inv - N) > 1e-9:
        raise InvalidInstance(f"δ={delta!r} is not a unit fraction")
    return N


@dataclass(frozen=True, eq=False)
class MarketInstance:
    """Ground truth for one simulated consumer and merchant.

    Attributes:
        v: valuations, each a positive multiple of ``delta`` and at most 1.
        c: per-unit production costs in [0, 1].
        B: consumer budget (>= 0).
        delta: valuation increment; ``1/delta`` must be an integer.
    """

    v: FloatArray
    c: FloatArray
    B: float
    delta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "v", _frozen(self.v))
        object.__setattr__(self, "c", _frozen(self.c))
        object.__setattr__(self, "B", float(self.B))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def n(self) -> int:
        return int(self.v.shape[0])

    @property
    def grid(self) -> int:
        """Number of valuation levels, ``1/delta``."""
        return grid_size(self.delta)

    def value_levels(self) -> tuple[int, ...]:
        """Valuations as integer multiples of ``delta``."""
        N = self.grid
        return tuple(int(round(x * N)) for x in self.v)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "v": [float(x) for x in self.v],
            "c": [float(x) for x in self.c],
            "B": self.B,
            "delta": self.delta,
        }

    def __repr__(self) -> str:
        return (
            f"MarketInstance(v={self.v.tolist()}, c={self.c.tolist()}, "
            f"B={self.B!r}, delta={self.delta!r})"
        )


def validate_instance(inst: MarketInstance) -> MarketInstance:
    """Check every instance invariant and return the instance unchanged.

    Raises :class:`InvalidInstance` naming the first violated invariant.
    """
    N = grid_size(inst.delta)
    if inst.v.shape[0] < 1:
        raise InvalidInstance("n must be a positive integer")
    if inst.c.shape != inst.v.shape:
        raise InvalidInstance(
            f"cost vector has {inst.c.shape[0]} entries, expected {inst.n}"
        )
    for i, vi in enumerate(inst.v, start=1):
        level = vi * N
        k = round(level)
        if not math.isfinite(vi) or abs(level - k) > 1e-9:
            raise InvalidInstance(f"v_{i} not on δ-grid")
        if not 1 <= k <= N:
            raise InvalidInstance(f"v_{i}={vi!r} outside [δ, 1]")
    for i, ci in enumerate(inst.c, start=1):
        if not (0.0 <= ci <= 1.0):
            raise InvalidInstance(f"c_{i}={ci!r} outside [0, 1]")
    if not math.isfinite(inst.B):
        raise InvalidInstance("budget is not finite")
    if inst.B < 0:
        raise InvalidInstance("negative budget")
    return inst


def check_prices(p: ArrayLike, n: int | None = None, floor: float = 0.0) -> PriceVector:
    """Coerce ``p`` to a float array and verify ``floor < p_i <= 1``.

    A positive ``floor`` additionally requires ``p_i >= floor``.
    """
    arr = np.asarray(p, dtype=np.float64).reshape(-1)
    if n is not None and arr.shape[0] != n:
        raise InvalidPrices(f"expected {n} prices, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidPrices("prices must be finite")
    if np.any(arr <= 0.0) or np.any(arr > 1.0 + ATOL):
        raise InvalidPrices(f"prices must lie in (0, 1]: {arr.tolist()}")
    if floor > 0.0 and np.any(arr < floor - ATOL):
        raise InvalidPrices(f"prices below floor {floor}: {arr.tolist()}")
    return arr


def bang_per_buck(v: ArrayLike, p: ArrayLike) -> BangPerBuck:
    """Per-good utility per unit of currency, ``v_i / p_i``."""
    return np.asarray(v, dtype=np.float64) / np.asarray(p, dtype=np.float64)


def profit(x: ArrayLike, p: ArrayLike, c: ArrayLike) -> float:
    """Merchant profit ``x . (p - c)``."""
    x = np.asarray(x, dtype=np.float64)
    return float(x @ (np.asarray(p, dtype=np.float64) - np.asarray(c, dtype=np.float64)))


# -- instance files ---------------------------------------------------------

_INSTANCE_FIELDS = {"n", "v", "c", "B", "delta"}


def instance_from_dict(data: dict[str, Any]) -> MarketInstance:
    unknown = set(data) - _INSTANCE_FIELDS
    if unknown:
        raise InvalidInstance(f"unknown instance fields: {sorted(unknown)}")
    missing = _INSTANCE_FIELDS - set(data)
    if missing:
        raise InvalidInstance(f"missing instance fields: {sorted(missing)}")
    inst = MarketInstance(v=data["v"], c=data["c"], B=data["B"], delta=data["delta"])
    if int(data["n"]) != inst.n:
        raise InvalidInstance(f"n={data['n']} disagrees with len(v)={inst.n}")
    return validate_instance(inst)


def load_instance(path: str | Path) -> MarketInstance:
    with open(path, encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))


def save_instance(inst: MarketInstance, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(inst.to_dict(), fh, indent=2)
        fh.write("\n")
