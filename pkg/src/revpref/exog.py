"""Online bundle prediction when prices are chosen by someone else.

Each round a price vector arrives, the learner predicts the consumer's
bundle, and then sees the real one.  Whenever good ``i`` was bought more
than good ``j`` the consumer must have ``v_i / p_i >= v_j / p_j``, which is a
halfspace through the origin in valuation space.  The learner keeps the set
of valuations consistent with all of these, predicts with a uniformly
sampled member, and pins a coordinate to the grid once the set has become
narrower than ``delta / 2`` along it.  Pinning a coordinate starts a new
epoch in which the remaining coordinates restart from the unit box.

The constraint set is stored in reduced form: for each ordered pair only
the tightest ratio is kept, and for each coordinate only the tightest bound
implied by pinned coordinates.  This describes the same set as the full list
of observed constraints.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .consumer import TieBreak, greedy_bundle
from .core import ATOL, FloatArray, MarketInstance, check_prices, grid_size
from .polytope import (
    DEGENERATE_WIDTH,
    HalfspaceSystem,
    Infeasible,
    extreme_points,
    sample_uniform,
    widths_from,
)

History = Sequence["RoundRecord"]
PriceSource = Callable[[int, History], FloatArray]

WIDTH_LOG_EVERY = 10


@dataclass
class LearnerState:
    """Everything the exogenous learner knows.

    ``fixed`` maps pinned coordinates to grid values.  ``pair_ratio[(i, j)]``
    is the largest ``q`` seen with ``z_i >= q * z_j``; ``lower`` and
    ``upper`` hold bounds on single free coordinates that came from pinned
    partners.
    """

    n: int
    delta: float
    steps: int | None = None
    lower_bound: float = 0.0
    fixed: dict[int, float] = field(default_factory=dict)
    epoch: int = 0
    mistakes: int = 0
    round: int = 0
    pair_ratio: dict[tuple[int, int], float] = field(default_factory=dict)
    lower: dict[int, float] = field(default_factory=dict)
    upper: dict[int, float] = field(default_factory=dict)
    system: HalfspaceSystem | None = None
    last_sample: FloatArray | None = None
    last_hypothesis: FloatArray | None = None
    last_prediction: FloatArray | None = None
    _extremes: tuple[FloatArray, FloatArray] | None = None

    def __post_init__(self) -> None:
        grid_size(self.delta)
        self.reset_epoch()

    @property
    def free(self) -> list[int]:
        return [i for i in range(self.n) if i not in self.fixed]

    def reset_epoch(self) -> None:
        """Forget all constraints on the free coordinates."""
        self.pair_ratio.clear()
        self.lower.clear()
        self.upper.clear()
        self.last_sample = None
        self._extremes = None
        self.system = self._build()

    def _build(self) -> HalfspaceSystem:
        free = self.free
        pos = {g: k for k, g in enumerate(free)}
        S = HalfspaceSystem.box(len(free))
        if self.lower_bound > 0:
            for k in range(len(free)):
                e = np.zeros(len(free))
                e[k] = 1.0
                S.add(e, self.lower_bound)
        for (i, j), q in sorted(self.pair_ratio.items()):
            a = np.zeros(len(free))
            a[pos[i]] = 1.0
            a[pos[j]] = -q
            S.add(a, 0.0)
        for i, lb in sorted(self.lower.items()):
            e = np.zeros(len(free))
            e[pos[i]] = 1.0
            S.add(e, lb)
        for i, ub in sorted(self.upper.items()):
            e = np.zeros(len(free))
            e[pos[i]] = -1.0
            S.add(e, -ub)
        return S

    def extremes(self) -> tuple[FloatArray, FloatArray]:
        """Per-coordinate LP minimizers and maximizers of the current system."""
        assert self.system is not None
        if self._extremes is not None:
            lo, hi = self._extremes
            if all(self.system.contains(z) for z in lo) and all(
                self.system.contains(z) for z in hi
            ):
                return self._extremes
        self._extremes = extreme_points(self.system)
        return self._extremes

    def widths(self) -> FloatArray:
        if not self.free:
            return np.zeros(0)
        return widths_from(*self.extremes())

    def hypothesis(self, z: FloatArray) -> FloatArray:
        """Full valuation vector: ``z`` on free coordinates, pinned values elsewhere."""
        v = np.empty(self.n)
        for k, i in enumerate(self.free):
            v[i] = z[k]
        for i, w in self.fixed.items():
            v[i] = w
        return v


@dataclass(frozen=True)
class RoundRecord:
    t: int
    prices: FloatArray
    prediction: FloatArray
    bundle: FloatArray
    mistake: bool
    epoch: int


@dataclass(frozen=True)
class RoundAudit:
    """Per-round checks on the constraints generated that round."""

    t: int
    epoch: int
    mistake: bool
    constraints: int
    hypothesis_cut: bool
    truth_slack: float
    widths: FloatArray | None


def ratio_pairs(x: FloatArray) -> list[tuple[int, int]]:
    """Ordered pairs ``(i, j)`` with ``x_i > x_j``."""
    n = x.shape[0]
    return [(i, j) for i in range(n) for j in range(n) if x[i] > x[j] + ATOL]


def ratio_slack(v: FloatArray, p: FloatArray, pairs: list[tuple[int, int]]) -> float:
    """Smallest ``v_i p_j - v_j p_i`` over ``pairs`` (``inf`` if there are none)."""
    if not pairs:
        return math.inf
    return min(v[i] * p[j] - v[j] * p[i] for i, j in pairs)


def sample_hypothesis(state: LearnerState, rng: np.random.Generator) -> FloatArray:
    """A roughly uniform point of the consistent set (free coordinates only).

    Pinned-thin sets fall back to the LP central point.
    """
    assert state.system is not None
    if not state.free:
        return np.zeros(0)
    lo, hi = state.extremes()
    centre = np.vstack([lo, hi]).mean(axis=0)
    if np.any(widths_from(lo, hi) < DEGENERATE_WIDTH):
        return centre
    start = state.last_sample if state.last_sample is not None else centre
    z = sample_uniform(state.system, rng, state.steps, start=start)
    state.last_sample = z
    return z


def predict(
    state: LearnerState, p: FloatArray, B: float, rng: np.random.Generator
) -> FloatArray:
    """Bundle the sampled hypothesis would buy at ``p``."""
    z = sample_hypothesis(state, rng)
    v = state.hypothesis(z)
    state.last_hypothesis = v
    x = greedy_bundle(v, p, B, TieBreak.LEXICOGRAPHIC)
    state.last_prediction = x
    return x


def _add_constraints(state: LearnerState, p: FloatArray, pairs: list[tuple[int, int]]) -> None:
    changed = False
    for i, j in pairs:
        fi, fj = i in state.fixed, j in state.fixed
        if fi and fj:
            wi, wj = state.fixed[i], state.fixed[j]
            if wi * p[j] - wj * p[i] < -ATOL:
                raise Infeasible(f"pinned goods {i}, {j} contradict the observation at {p}")
        elif fj:
            lb = state.fixed[j] * p[i] / p[j]
            if lb > state.lower.get(i, -math.inf) + 1e-15:
                state.lower[i] = lb
                changed = True
        elif fi:
            ub = state.fixed[i] * p[j] / p[i]
            if ub < state.upper.get(j, math.inf) - 1e-15:
                state.upper[j] = ub
                changed = True
        else:
            q = p[i] / p[j]
            if q > state.pair_ratio.get((i, j), -math.inf) + 1e-15:
                state.pair_ratio[(i, j)] = q
                changed = True
    if changed:
        state.system = state._build()


def _fix_collapsed(state: LearnerState, rng: np.random.Generator) -> list[int]:
    """Pin every free coordinate whose width fell below ``delta / 2``."""
    if not state.free:
        return []
    w = state.widths()
    collapsed = [k for k in range(len(w)) if w[k] < state.delta / 2 - ATOL]
    if not collapsed:
        return []
    lo, hi = state.extremes()
    if np.any(w < DEGENERATE_WIDTH):
        z = np.vstack([lo, hi]).mean(axis=0)
    else:
        z = sample_uniform(state.system, rng, state.steps, start=state.last_sample)
    free = state.free
    N = grid_size(state.delta)
    pinned = []
    for k in collapsed:
        level = math.floor(z[k] * N + 0.5)
        state.fixed[free[k]] = level / N
        pinned.append(free[k])
    state.epoch += 1
    state.reset_epoch()
    return pinned


def observe(
    state: LearnerState, p: FloatArray, x: FloatArray, rng: np.random.Generator
) -> bool:
    """Fold the observed bundle into the state; returns the mistake flag.

    Raises :class:`Infeasible` if the observation contradicts everything
    seen so far, which a utility-maximizing consumer never causes.
    """
    x = np.asarray(x, dtype=np.float64)
    pred = state.last_prediction
    mistake = pred is not None and bool(np.any(np.abs(pred - x) > ATOL))
    state.mistakes += int(mistake)
    state.round += 1
    _add_constraints(state, p, ratio_pairs(x))
    if state.free:
        state.extremes()  # raises Infeasible on an empty set
    _fix_collapsed(state, rng)
    return mistake


@dataclass
class ExogRun:
    mistakes: int
    epochs: int
    records: list[RoundRecord]
    audits: list[RoundAudit]
    fixed: dict[int, float]

    def mistakes_after(self, t0: int) -> int:
        return sum(r.mistake for r in self.records if r.t >= t0)


def run_exog(
    inst: MarketInstance,
    source: PriceSource,
    T: int,
    rng: np.random.Generator,
    steps: int | None = None,
    lower_bound: float = 0.0,
    policy: TieBreak = TieBreak.LEXICOGRAPHIC,
) -> ExogRun:
    """Run ``T`` predict/observe rounds against the instance's consumer.

    ``source(t, history)`` supplies each round's prices and sees every
    earlier round, so it may adapt.  ``lower_bound`` adds ``z_i >= lower_bound``
    to every epoch's box.
    """
    state = LearnerState(inst.n, inst.delta, steps=steps, lower_bound=lower_bound)
    records: list[RoundRecord] = []
    audits: list[RoundAudit] = []
    for t in range(T):
        p = check_prices(source(t, records), inst.n)
        pred = predict(state, p, inst.B, rng)
        hyp = state.last_hypothesis
        epoch = state.epoch
        x = greedy_bundle(inst.v, p, inst.B, policy, inst.c)
        pairs = ratio_pairs(x)
        mistake = observe(state, p, x, rng)
        assert hyp is not None
        records.append(RoundRecord(t, p, pred, x, mistake, epoch))
        audits.append(
            RoundAudit(
                t=t,
                epoch=epoch,
                mistake=mistake,
                constraints=len(pairs),
                hypothesis_cut=ratio_slack(hyp, p, pairs) < 0.0,
                truth_slack=ratio_slack(inst.v, p, pairs),
                widths=state.widths() if t % WIDTH_LOG_EVERY == 0 else None,
            )
        )
    return ExogRun(state.mistakes, state.epoch, records, audits, dict(state.fixed))


# -- price sources ----------------------------------------------------------


def random_grid_prices(n: int, delta: float, rng: np.random.Generator) -> PriceSource:
    """Each price uniform on ``{delta, 2 delta, ..., 1}``."""
    N = grid_size(delta)

    def source(t: int, history: History) -> FloatArray:
        return rng.integers(1, N + 1, size=n) / N

    return source


def replay_prices(rows: Sequence[Sequence[float]]) -> PriceSource:
    """Replay fixed price vectors in order."""
    table = [check_prices(r) for r in rows]

    def source(t: int, history: History) -> FloatArray:
        if t >= len(table):
            raise IndexError(f"price sequence has only {len(table)} rows")
        return table[t]

    return source


def load_price_file(path: str | Path, n: int) -> list[FloatArray]:
    """Read a CSV of price rows; ``#`` lines and a non-numeric header are skipped."""
    rows: list[FloatArray] = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                vals = [float(s) for s in row]
            except ValueError:
                if not rows:
                    continue
                raise ValueError(f"{path}:{lineno}: non-numeric price row") from None
            if len(vals) != n:
                raise ValueError(f"{path}:{lineno}: expected {n} prices, got {len(vals)}")
            try:
                rows.append(check_prices(vals))
            except ValueError as err:
                raise ValueError(f"{path}:{lineno}: {err}") from None
    return rows


def tie_seeking_prices(
    inst: MarketInstance, rng: np.random.Generator, candidates: int = 16
) -> PriceSource:
    """Adversarial source: among random grid vectors, post the one closest to a tie.

    Uses the true valuations to pick prices under which some pair of goods
    has nearly equal bang per buck, where predictions are easiest to get
    wrong.
    """
    N = grid_size(inst.delta)
    n = inst.n

    def source(t: int, history: History) -> FloatArray:
        P = rng.integers(1, N + 1, size=(candidates, n)) / N
        if n < 2:
            return P[0]
        r = np.sort(inst.v / P, axis=1)
        gaps = np.min(np.diff(r, axis=1), axis=1)
        return P[int(np.argmin(gaps))]

    return source
