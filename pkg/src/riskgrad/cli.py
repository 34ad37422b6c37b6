"""Command line entry point: ``riskgrad train | analyze | plot``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from collections import defaultdict
from pathlib import Path

from . import complexity
from .harness import (ConfigError, NumericalFailure, aggregate_runs, analyze,
                      analyze_csv, load_run, load_study, run_study)
from .plotting import emit_chart

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="riskgrad", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train policies for every beta and seed")
    t.add_argument("--config", help="preset name or key=value config file")
    t.add_argument("--env")
    t.add_argument("--beta", type=float, help="single beta; 0 is risk-neutral")
    t.add_argument("--seeds", help="e.g. 0..9 or 1,2,5")
    t.add_argument("--iters", type=int)
    t.add_argument("--traj", type=int)
    t.add_argument("--horizon", type=int)
    t.add_argument("--gamma", type=float)
    t.add_argument("--lr", type=float)
    t.add_argument("--hidden", help="three comma-separated widths")
    t.add_argument("--out")
    t.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    t.add_argument("--timing", action="store_true",
                   help="fill the ms column of metrics.csv (breaks byte-identical replays)")
    t.add_argument("--plot", action="store_true",
                   help="also write return and gradnorm charts for the study")

    a = sub.add_parser("analyze", help="iteration-bound sweep over beta")
    a.add_argument("--gamma", type=float, required=True)
    a.add_argument("--rmax", type=float, required=True)
    a.add_argument("--f1", type=float, default=1.0)
    a.add_argument("--f2", type=float, default=1.0)
    a.add_argument("--a", type=float, default=0.0)
    a.add_argument("--b", type=float, default=1.0)
    a.add_argument("--c", type=float, default=0.0)
    a.add_argument("--delta0", type=float, default=1.0)
    a.add_argument("--eps", type=float, default=0.1)
    a.add_argument("--betas", required=True, help="comma-separated, nonzero")
    a.add_argument("--out", help="write CSV here instead of stdout")

    g = sub.add_parser("plot", help="aggregate run directories into a chart")
    g.add_argument("--in", dest="indir", required=True)
    g.add_argument("--metric", default="return",
                   choices=["return", "gradnorm", "disc_return", "saturations"])
    g.add_argument("--out", required=True)
    return p


def _plot_dir(indir, metric, out):
    groups = defaultdict(list)
    for metrics in sorted(Path(indir).rglob("metrics.csv")):
        rec = load_run(metrics.parent)
        groups[rec.config.label].append(rec)
    if not groups:
        raise ConfigError(f"no metrics.csv files under {indir}")
    tables = [aggregate_runs(recs) for _, recs in sorted(groups.items())]
    return emit_chart(tables, metric, out)


def cmd_train(args):
    configs = load_study(args.config, env=args.env, beta=args.beta, seeds=args.seeds,
                         iters=args.iters, traj=args.traj, horizon=args.horizon,
                         gamma=args.gamma, lr=args.lr, hidden=args.hidden, out=args.out)
    records = run_study(configs, jobs=args.jobs, with_timing=args.timing)
    for cfg in configs:
        recs = [r for r in records if r.config == cfg]
        agg = aggregate_runs(recs)
        out = Path(cfg.out_dir) / cfg.label
        (out / "aggregate.csv").write_text(agg.to_csv())
        tail = agg.mean["mean_return"][-min(100, agg.iterations):].mean()
        print(f"{cfg.label}: {len(recs)} runs, final mean return {tail:.2f} -> {out}")
    if args.plot:
        root = Path(configs[0].out_dir)
        for metric in ("return", "gradnorm"):
            print(_plot_dir(root, metric, root / f"{metric}.svg"))
    return EXIT_OK


def cmd_analyze(args):
    inputs = complexity.ComplexityInputs(args.gamma, args.rmax, args.f1, args.f2,
                                         args.a, args.b, args.c, args.delta0, args.eps)
    betas = [float(b) for b in args.betas.split(",") if b.strip()]
    text = analyze_csv(analyze(inputs, betas))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_plot(args):
    print(_plot_dir(args.indir, args.metric, args.out))
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"train": cmd_train, "analyze": cmd_analyze, "plot": cmd_plot}[args.command]
    try:
        return handler(args)
    except NumericalFailure as exc:
        print(f"riskgrad: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError) as exc:
        print(f"riskgrad: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
