"""Command line entry point: ``run``, ``report`` and ``list-conditions``."""
from __future__ import annotations

import argparse
import sys

from .config import expand_grid, load_config
from .report import REPORT_KINDS, report
from .runner import run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slope-ope", description="Estimator-selection experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output directory (default: config 'output')")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--master-seed", type=int, default=None)

    p_rep = sub.add_parser("report", help="summarize a finished run")
    p_rep.add_argument("--records", required=True, help="run output directory")
    p_rep.add_argument("--kind", required=True, choices=REPORT_KINDS)
    p_rep.add_argument("--out", required=True, help="CSV file to write")
    p_rep.add_argument("--alpha", type=float, default=0.05)

    p_list = sub.add_parser("list-conditions", help="print the expanded condition grid")
    p_list.add_argument("--config", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        config = load_config(args.config)
        if args.master_seed is not None:
            config.master_seed = args.master_seed
        out = args.out or config.output
        if out is None:
            print("error: no output directory (use --out)", file=sys.stderr)
            return 2
        records = run(config, out, workers=args.workers)
        print(f"wrote {len(records)} new records to {out}")
    elif args.command == "report":
        path = report(args.records, args.kind, args.out, alpha=args.alpha)
        print(f"wrote {path}")
    else:
        conds = expand_grid(load_config(args.config))
        for c in conds:
            print(c.condition_id)
        print(f"{len(conds)} conditions", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
