"""Command line entry point: ``smlb run | check-schedules | self-test``."""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from ..errors import ConfigError, NumericalGuardError
from . import config as cfgmod
from .experiments import run_experiment
from .selftest import run_self_test

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _cmd_run(args):
    cfg = cfgmod.load_config(args.config, seed=args.seed)
    table, paths = run_experiment(cfg, out=args.out or cfg.out, workers=args.workers,
                                  svg=False if args.no_svg else None)
    for p in paths:
        print(p)
    return EXIT_OK


def _cmd_check_schedules(args):
    checks = [
        {"kind": "constant", "T": 100_000, "c": 2.0},
        {"kind": "exp_then_const", "T": 100_000, "c": 5.0, "delta": 0.01},
    ]
    for i, sched in enumerate(checks):
        p_values = [1.0, 2.0, 3.0] if sched["kind"] == "constant" else [1.0]
        raw = {"experiment": "schedule_check", "seed": args.seed or 0, "schedule": sched,
               "sweep": {"param": "p", "values": p_values}}
        cfg = cfgmod.from_dict(raw)
        out = Path(args.out or cfg.out) / f"schedules_{i}"
        table, _ = run_experiment(cfg, out=out, workers=args.workers, svg=False if args.no_svg else None)
        print(f"[{sched['kind']}] " + " ".join(f"{k}={v}" for k, v in sched.items() if k != "kind"))
        print("  " + "  ".join(f"{c:>22s}" for c in table.columns))
        for row in table.rows:
            print("  " + "  ".join(f"{v:22.15g}" for v in row))
        for note in table.notes:
            print(f"  note: {note}")
    return EXIT_OK


def _cmd_self_test(args):
    return EXIT_OK if run_self_test(seed=args.seed or 0) else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog="smlb", description="Score-mismatch laboratory for zero-shot DDPM samplers.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--workers", type=int, default=None, help="worker processes (default: $SMLB_WORKERS or 1)")
    common.add_argument("--no-svg", action="store_true", help="skip SVG charts")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", parents=[common], help="run an experiment from a JSON config or a result CSV footer")
    run.add_argument("config")
    run.set_defaults(func=_cmd_run)
    chk = sub.add_parser("check-schedules", parents=[common], help="coefficient-sum checks for the reference schedules")
    chk.set_defaults(func=_cmd_check_schedules)
    st = sub.add_parser("self-test", parents=[common], help="run the analytic invariant checks")
    st.set_defaults(func=_cmd_self_test)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalGuardError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
