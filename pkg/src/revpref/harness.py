"""Seeded experiments: instance generation, trial loops and report files.

Trial ``k`` of a run with seed ``s`` draws from
``numpy.random.default_rng(SeedSequence(s, spawn_key=(k,)))``, so every
trial is reproducible on its own and independent of execution order.

Reports are written as ``summary.json``, ``trials.csv`` and optionally
``trace_<trial>.csv``.  CSV files start with a ``# schema=1`` line and all
floats are written with 17 significant digits, which makes identical runs
byte-identical.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from .consumer import Consumer, TieBreak
from .core import (
    FloatArray,
    InvalidInstance,
    MarketInstance,
    grid_size,
    load_instance,
    validate_instance,
)
from .exog import load_price_file, random_grid_prices, replay_prices, run_exog
from .learnval import learn_valuations
from .optprice import optimal_prices
from .profitmax import run_profit_max

SCHEMA = 1
SUBCOMMANDS = ("oracle", "optprice", "learnval", "profitmax", "exog", "gen")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def fmt(x: Any) -> str:
    """Scalar to text; floats get 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if x is None:
        return ""
    return str(x)


def to_json(obj: Any, indent: int = 0) -> str:
    """Deterministic JSON with 17-digit floats and sorted keys."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        vals = [to_json(v, indent + 1) for v in list(obj)]
        return "[" + ", ".join(vals) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return json.dumps(str(x))
        return format(x, ".17g")
    if isinstance(obj, Fraction):
        return json.dumps(fmt(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable[Any]]) -> None:
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(x) for x in row) + "\n")
    path.write_text(buf.getvalue(), encoding="utf-8")


# -- generation -------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    n: int
    delta: float
    bmin: float
    bmax: float

    @classmethod
    def parse(cls, text: str) -> "GeneratorSpec":
        """Parse ``n=3,delta=0.25,bmin=0.5,bmax=3``; budget bounds default to 0.5 and n."""
        fields: dict[str, str] = {}
        for part in text.split(","):
            key, sep, val = part.partition("=")
            if not sep:
                raise ValueError(f"bad generator field {part!r}; expected key=value")
            fields[key.strip()] = val.strip()
        unknown = set(fields) - {"n", "delta", "bmin", "bmax"}
        if unknown:
            raise ValueError(f"unknown generator fields {sorted(unknown)}")
        if "n" not in fields or "delta" not in fields:
            raise ValueError("generator needs n and delta")
        n = int(fields["n"])
        return cls(
            n=n,
            delta=float(fields["delta"]),
            bmin=float(fields.get("bmin", 0.5)),
            bmax=float(fields.get("bmax", n)),
        )


def generate_instance(
    n: int, delta: float, budget: tuple[float, float], rng: np.random.Generator
) -> MarketInstance:
    """Random instance: grid valuations, uniform costs, uniform budget."""
    if n < 1:
        raise InvalidInstance("n must be a positive integer")
    N = grid_size(delta)
    lo, hi = budget
    if not 0 <= lo <= hi:
        raise InvalidInstance(f"bad budget range [{lo}, {hi}]")
    v = rng.integers(1, N + 1, size=n) / N
    c = rng.uniform(0.0, 1.0, size=n)
    B = float(rng.uniform(lo, hi))
    return validate_instance(MarketInstance(v=v, c=c, B=B, delta=1.0 / N))


def generate_prices(
    kind: str,
    n: int,
    delta: float,
    rng: np.random.Generator | None = None,
    path: str | Path | None = None,
) -> Callable:
    """Price source for the exogenous learner: ``random`` or ``file``."""
    if kind == "random":
        if rng is None:
            raise ValueError("random prices need an rng")
        return random_grid_prices(n, delta, rng)
    if kind == "file":
        if path is None:
            raise ValueError("file prices need a path")
        return replay_prices(load_price_file(path, n))
    raise ValueError(f"unknown price source {kind!r}")


# -- experiments ------------------------------------------------------------


@dataclass
class ExperimentConfig:
    subcommand: str
    instance: str | None = None
    gen: GeneratorSpec | None = None
    rounds: int = 1000
    trials: int = 1
    seed: int = 0
    eps: float | None = None
    prices: str = "random"
    out: Path = Path(".")
    trace: bool = False

    def __post_init__(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand {self.subcommand!r}")
        if self.subcommand != "gen" and (self.instance is None) == (self.gen is None):
            raise ValueError("give exactly one of --instance or --gen")
        if self.subcommand == "gen" and self.gen is None:
            raise ValueError("gen needs --gen")
        if self.rounds < 0 or self.trials < 1:
            raise ValueError("rounds must be >= 0 and trials >= 1")

    def as_dict(self) -> dict[str, Any]:
        return {
            "subcommand": self.subcommand,
            "instance": self.instance,
            "gen": None if self.gen is None else vars(self.gen),
            "rounds": self.rounds,
            "trials": self.trials,
            "seed": self.seed,
            "eps": self.eps,
            "prices": self.prices,
        }


@dataclass
class TrialRecord:
    """One trial: its summary row plus optional per-round rows."""

    trial: int
    seed: int
    summary: dict[str, Any]
    trace_header: list[str] = field(default_factory=list)
    trace: list[list[Any]] = field(default_factory=list)


def _instance_for(cfg: ExperimentConfig, fixed: MarketInstance | None, rng) -> MarketInstance:
    if fixed is not None:
        return fixed
    assert cfg.gen is not None
    g = cfg.gen
    return generate_instance(g.n, g.delta, (g.bmin, g.bmax), rng)


def _price_rows(cfg: ExperimentConfig, inst: MarketInstance, rng) -> list[FloatArray]:
    kind, _, path = cfg.prices.partition(":")
    src = generate_prices(kind, inst.n, inst.delta, rng, path or None)
    return [src(t, []) for t in range(cfg.rounds)]


def _vec_cols(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(n)]


def _trial_oracle(cfg, inst, rng, k) -> TrialRecord:
    consumer = Consumer(inst, TieBreak.LEXICOGRAPHIC)
    rows = []
    util = 0.0
    for t, p in enumerate(_price_rows(cfg, inst, rng)):
        x = consumer(p)
        u = float(x @ inst.v)
        util += u
        rows.append([t, *p, *x, u, float(x @ p)])
    header = ["t", *_vec_cols("p", inst.n), *_vec_cols("x", inst.n), "utility", "spend"]
    return TrialRecord(k, cfg.seed, {"rounds": len(rows), "mean_utility": util / max(len(rows), 1)}, header, rows)


def _trial_optprice(cfg, inst, rng, k) -> TrialRecord:
    eps = 0.01 if cfg.eps is None else cfg.eps
    res = optimal_prices(inst, eps)
    summary = {
        "prices": res.prices.tolist(),
        "bundle": res.bundle.tolist(),
        "profit": res.profit,
        "profit_bound": res.profit_bound,
        "pivot": res.k,
        "eps": eps,
    }
    header = ["k", *_vec_cols("p", inst.n), *_vec_cols("x", inst.n), "profit"]
    rows = [[cd.k, *cd.prices, *cd.bundle, cd.profit] for cd in res.candidates]
    return TrialRecord(k, cfg.seed, summary, header, rows)


def _trial_learnval(cfg, inst, rng, k) -> TrialRecord:
    res = learn_valuations(Consumer(inst, TieBreak.CHEAPEST_FIRST), inst.delta)
    summary = {
        "s": ["unlearnable" if s is None else fmt(s) for s in res.s],
        "unlearnable": sorted(res.unlearnable),
        "pivot": res.j,
        "queries": res.queries,
    }
    header = ["round", *_vec_cols("p", inst.n), *_vec_cols("x", inst.n)]
    rows = [[t, *p, *x] for t, (p, x) in enumerate(res.log.queries)]
    return TrialRecord(k, cfg.seed, summary, header, rows)


def _trial_profitmax(cfg, inst, rng, k) -> TrialRecord:
    led = run_profit_max(inst, cfg.rounds, eps=cfg.eps)
    summary = {
        "rounds": led.T,
        "learning_rounds": led.learning_rounds,
        "complete": led.complete,
        "eps": led.eps,
        "opt_reference": led.opt_reference,
        "exploit_profit": led.exploit_profit,
        "exploit_prices": None if led.exploit_prices is None else led.exploit_prices.tolist(),
        "per_round_regret": led.per_round_regret if led.T else 0.0,
        "cumulative_regret": led.cumulative_regret,
    }
    rows = []
    total = 0.0
    for r in led.rounds:
        total += r.profit
        rows.append([r.t, r.profit, r.phase, led.opt_reference - total / (r.t + 1)])
    return TrialRecord(k, cfg.seed, summary, ["t", "profit", "phase", "regret_to_date"], rows)


def _trial_exog(cfg, inst, rng, k) -> TrialRecord:
    kind, _, path = cfg.prices.partition(":")
    src = generate_prices(kind, inst.n, inst.delta, rng, path or None)
    run = run_exog(inst, src, cfg.rounds, rng)
    summary = {
        "mistakes": run.mistakes,
        "epochs": run.epochs,
        "rounds": len(run.records),
        "truth_violations": sum(a.truth_slack < -1e-9 for a in run.audits),
    }
    header = ["t", "epoch", "mistake", *_vec_cols("p", inst.n), *_vec_cols("x", inst.n), *_vec_cols("xhat", inst.n)]
    rows = [[r.t, r.epoch, r.mistake, *r.prices, *r.bundle, *r.prediction] for r in run.records]
    return TrialRecord(k, cfg.seed, summary, header, rows)


_TRIALS = {
    "oracle": _trial_oracle,
    "optprice": _trial_optprice,
    "learnval": _trial_learnval,
    "profitmax": _trial_profitmax,
    "exog": _trial_exog,
}


def _flat(summary: dict[str, Any]) -> dict[str, Any]:
    return {k: v for k, v in summary.items() if not isinstance(v, (list, tuple, dict))}


def run_experiment(cfg: ExperimentConfig) -> tuple[dict[str, Any], str]:
    """Run every trial, write the report files and return (summary, digest line)."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    fixed = load_instance(cfg.instance) if cfg.instance else None

    if cfg.subcommand == "gen":
        insts = [_instance_for(cfg, None, trial_rng(cfg.seed, k)) for k in range(cfg.trials)]
        summary = {"config": cfg.as_dict(), "instances": [i.to_dict() for i in insts]}
        (out / "summary.json").write_text(to_json(summary) + "\n", encoding="utf-8")
        for k, inst in enumerate(insts):
            (out / f"instance_{k}.json").write_text(to_json(inst.to_dict()) + "\n", encoding="utf-8")
        return summary, f"gen: wrote {len(insts)} instance(s) to {out}"

    records = []
    for k in range(cfg.trials):
        rng = trial_rng(cfg.seed, k)
        inst = _instance_for(cfg, fixed, rng)
        rec = _TRIALS[cfg.subcommand](cfg, inst, rng, k)
        rec.summary = {"instance": inst.to_dict(), **rec.summary}
        records.append(rec)

    keys = sorted(_flat(records[0].summary))
    write_csv(
        out / "trials.csv",
        ["trial", "seed", *keys],
        ([r.trial, r.seed, *(_flat(r.summary)[key] for key in keys)] for r in records),
    )
    if cfg.trace:
        for r in records:
            write_csv(out / f"trace_{r.trial}.csv", r.trace_header, r.trace)
    summary = {"config": cfg.as_dict(), "trials": [r.summary for r in records]}
    (out / "summary.json").write_text(to_json(summary) + "\n", encoding="utf-8")
    return summary, _digest(cfg, records)


def _digest(cfg: ExperimentConfig, records: list[TrialRecord]) -> str:
    s = records[0].summary
    name = cfg.subcommand
    if name == "exog":
        ms = [r.summary["mistakes"] for r in records]
        return f"exog: trials={len(ms)} mean_mistakes={np.mean(ms):.4g} max_mistakes={max(ms)}"
    if name == "profitmax":
        regs = [r.summary["per_round_regret"] for r in records]
        return f"profitmax: trials={len(regs)} per_round_regret={max(regs):.6g} learning_rounds={s['learning_rounds']}"
    if name == "learnval":
        return f"learnval: s={s['s']} unlearnable={s['unlearnable']} queries={s['queries']}"
    if name == "optprice":
        return f"optprice: prices={[fmt(p) for p in s['prices']]} profit={s['profit']:.6g}"
    return f"oracle: rounds={s['rounds']} mean_utility={s['mean_utility']:.6g}"


__all__ = [
    "ExperimentConfig",
    "GeneratorSpec",
    "TrialRecord",
    "generate_instance",
    "generate_prices",
    "run_experiment",
    "to_json",
    "trial_rng",
    "write_csv",
]
