"""Command-line entry point: one subcommand per experiment."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

from .errors import ConfigError
from .experiments import EXPERIMENTS, TOL_KEYS, ExperimentConfig, has_failures, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 2, 3


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _tol(text: str):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("tolerance overrides look like KEY=VALUE")
    try:
        return key.strip(), float(val)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad value in {text!r}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tensorpca", description="Spiked tensor experiments on the occupation-number basis.")
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--p", type=int, required=True, help="tensor order")
        sp.add_argument("--N", type=_int_list, required=True, help="comma list of dimensions")
        sp.add_argument("--nbos", type=_int_list, required=True, help="comma list of particle numbers")
        grp = sp.add_mutually_exclusive_group()
        grp.add_argument("--lambda", dest="lambdas", type=_float_list,
                         help="comma list of signal strengths (speedup-table: C = lambda N^(p/4))")
        grp.add_argument("--ratio", dest="ratios", type=_float_list, help="comma list of E0/Emax targets")
        sp.add_argument("--trials", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--ensemble", choices=("real", "complex"))
        sp.add_argument("--symmetrize", action="store_true")
        sp.add_argument("--out", default="results")
        sp.add_argument("--tol-override", type=_tol, action="append", default=[],
                        help=f"KEY=VAL, keys: {', '.join(sorted(TOL_KEYS))}")
        sp.add_argument("--window", choices=("hard", "erf"), default="erf")
        sp.add_argument("--epsilon-tilde", type=float)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--record-time", action="store_true", help="add a wall_time column (breaks byte-identity)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    cfg = ExperimentConfig(
        experiment=args.experiment, p=args.p, Ns=args.N, nbos=args.nbos, lambdas=args.lambdas,
        ratios=args.ratios, ensemble=args.ensemble, symmetrize=args.symmetrize, trials=args.trials,
        seed=args.seed, out=args.out, tol=dict(args.tol_override), window=args.window,
        epsilon=args.epsilon_tilde, workers=args.workers, record_time=args.record_time)
    try:
        summary = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    brief = {k: v for k, v in summary.items() if k not in ("cells", "config")}
    brief["cells"] = len(summary["cells"])
    print(json.dumps(brief, sort_keys=True))
    return EXIT_PARTIAL if has_failures(summary) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
