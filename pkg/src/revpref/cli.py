"""``revpref`` command line: run one experiment and write its reports."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import SUBCOMMANDS, ExperimentConfig, GeneratorSpec, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="revpref",
        description="Simulate a budgeted linear-utility consumer and the merchant learning from it.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    helps = {
        "oracle": "consumer bundles for a price sequence",
        "optprice": "near-optimal unique-response prices for a known instance",
        "learnval": "learn valuation ratios through price queries",
        "profitmax": "learn-then-exploit merchant with per-round regret",
        "exog": "online bundle prediction under externally chosen prices",
        "gen": "generate random instances",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        src = p.add_mutually_exclusive_group(required=True)
        if name != "gen":
            src.add_argument("--instance", metavar="PATH", help="instance JSON file")
        src.add_argument("--gen", metavar="SPEC", help="generator, e.g. n=3,delta=0.25,bmin=0.5,bmax=3")
        p.add_argument("--rounds", type=int, default=1000, metavar="T")
        p.add_argument("--trials", type=int, default=1, metavar="K")
        p.add_argument("--seed", type=int, default=0, metavar="S")
        p.add_argument("--eps", type=float, default=None, metavar="X")
        p.add_argument("--prices", default="random", metavar="{random|file:PATH}")
        p.add_argument("--out", type=Path, default=Path("."), metavar="DIR")
        p.add_argument("--trace", action="store_true", help="also write per-round trace_<trial>.csv")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig(
            subcommand=args.subcommand,
            instance=getattr(args, "instance", None),
            gen=GeneratorSpec.parse(args.gen) if args.gen else None,
            rounds=args.rounds,
            trials=args.trials,
            seed=args.seed,
            eps=args.eps,
            prices=args.prices,
            out=args.out,
            trace=args.trace,
        )
        _, digest = run_experiment(cfg)
    except (OSError, ValueError, RuntimeError, AssertionError, IndexError) as err:
        print(f"revpref: error: {err}", file=sys.stderr)
        return 1
    print(digest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
