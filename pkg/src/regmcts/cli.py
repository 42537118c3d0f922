"""Command-line entry point: ``regmcts {sweep,aggregate,plot,dump-tree}``."""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace

from .harness import (
    AGGREGATE_MODES,
    ExperimentConfig,
    aggregate,
    render_plot,
    run_sweep,
)
from .synthetic import DEFAULT_SIGMA, generate_tree, save_tree

# CLI flag -> ExperimentConfig field
_SWEEP_FLAGS = {
    "k": "k_list",
    "d": "d_list",
    "algo": "algorithms",
    "tau": "tau",
    "eps": "epsilon",
    "sigma": "sigma",
    "trees": "trees",
    "runs": "runs",
    "budget": "budget",
    "seed": "master_seed",
    "out": "output_dir",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regmcts", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run the synthetic-tree sweep and write runs.csv / final.csv")
    sweep.add_argument("--config", help="JSON file with ExperimentConfig fields; flags override it")
    sweep.add_argument("--k", type=int, nargs="+", help="branching factors")
    sweep.add_argument("--d", type=int, nargs="+", help="depths")
    sweep.add_argument("--algo", nargs="+", help="algorithms (UCT MENTS RENTS TENTS)")
    sweep.add_argument("--tau", type=float)
    sweep.add_argument("--eps", type=float)
    sweep.add_argument("--sigma", type=float)
    sweep.add_argument("--trees", type=int)
    sweep.add_argument("--runs", type=int)
    sweep.add_argument("--budget", type=int)
    sweep.add_argument("--seed", type=int, help="master seed")
    sweep.add_argument("--out", help="output directory")
    sweep.add_argument("--workers", type=int, default=1, help="worker processes (output is identical for any count)")
    sweep.add_argument("--quiet", action="store_true")

    agg = sub.add_parser("aggregate", help="summarize runs.csv or final.csv")
    agg.add_argument("--mode", choices=AGGREGATE_MODES, required=True)
    agg.add_argument("--in", dest="input", required=True)
    agg.add_argument("--out", required=True)

    plot = sub.add_parser("plot", help="render an aggregated table as SVG")
    plot.add_argument("--in", dest="input", required=True)
    plot.add_argument("--out", required=True)
    plot.add_argument("--metric", default="eps_omega_mean", help="trace-table column to plot")

    dump = sub.add_parser("dump-tree", help="write a generated synthetic tree as JSON")
    dump.add_argument("--k", type=int, required=True)
    dump.add_argument("--d", type=int, required=True)
    dump.add_argument("--seed", type=int, required=True)
    dump.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    dump.add_argument("--out", required=True)
    return parser


def _sweep(args) -> None:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {
        field: getattr(args, flag) for flag, field in _SWEEP_FLAGS.items() if getattr(args, flag) is not None
    }
    cfg = replace(cfg, **overrides).validate()
    start = time.monotonic()

    def progress(n, total, key):
        if not args.quiet and (n == total or n % 25 == 0):
            print(f"[{time.monotonic() - start:7.1f}s] {n}/{total} runs", file=sys.stderr)

    summary = run_sweep(cfg, workers=args.workers, progress=progress)
    print(f"wrote {summary.num_rows} rows for {summary.num_runs} runs to {summary.runs_path} and {summary.final_path}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            _sweep(args)
        elif args.command == "aggregate":
            print(aggregate(args.input, args.mode, args.out))
        elif args.command == "plot":
            print(render_plot(args.input, args.out, metric=args.metric))
        else:
            save_tree(generate_tree(args.k, args.d, args.seed, sigma=args.sigma), args.out)
            print(args.out)
    except (ValueError, OSError, KeyError) as exc:
        print(f"regmcts {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
