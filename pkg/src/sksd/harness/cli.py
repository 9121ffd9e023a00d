"""Command-line entry point: ``sksd test`` and ``sksd power``.

Exit codes: 0 success, 1 usage or input error, 2 estimator failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from ..estimators import EstimationError
from ..samplers import DgpSpec
from .config import TEST_KINDS, ConfigError, TestConfig, load_config, parse_kernel
from .runner import run_power_experiment, run_single_test

EXIT_OK, EXIT_USAGE, EXIT_ESTIMATOR = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_data_csv(path) -> np.ndarray:
    """One observation per row; a first row that does not parse as numbers is a header."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise UsageError(f"cannot read data file {path}: {exc}") from None
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise UsageError(f"data file {path} contains no observations")
    width = len(rows[0])
    data = np.empty((len(rows), width))
    for i, r in enumerate(rows):
        if len(r) != width:
            raise UsageError(f"row {i + 1} of {path} has {len(r)} fields, expected {width}")
        try:
            data[i] = [float(c) for c in r]
        except ValueError:
            raise UsageError(f"row {i + 1} of {path} is not numeric: {r}") from None
    if not np.all(np.isfinite(data)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(data), axis=1))[0]) + 1
        raise UsageError(f"row {bad} of {path} contains NaN or infinite values")
    return data


def _json_arg(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return {"name" if what == "model" else "kind": text}


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sksd", description="Semiparametric kernel Stein discrepancy tests.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="run one goodness-of-fit test")
    t.add_argument("--model", default="gaussian",
                   help='null family name or JSON object, e.g. \'{"name": "kef", "rank": 1}\'')
    t.add_argument("--estimator", default=None,
                   help="mle_gaussian, min_ksd_closed, score_matching_closed or min_ksd_numeric")
    t.add_argument("--kernel", default="gaussian", choices=["gaussian", "linear"])
    t.add_argument("--bandwidth", default="median", help='"median" or a positive number')
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV file, one observation per row")
    src.add_argument("--dgp", help='DGP kind or JSON object, e.g. \'{"kind": "student_t_shifted", "nu": 3}\'')
    t.add_argument("--n", type=int, default=100, help="sample size for --dgp")
    t.add_argument("--B", type=int, default=200)
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--pvalue-convention", default="paper", choices=["paper", "plus-one"])
    t.add_argument("--test", default="sksd", choices=TEST_KINDS)
    t.add_argument("--mc-draws", type=int, default=None,
                   help="Monte Carlo draws for the orthogonal kernel (default 10 n)")
    t.add_argument("--no-replicates", action="store_true",
                   help="omit bootstrap replicate values from the JSON report")

    p = sub.add_parser("power", help="run a replicated power or size experiment")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--R", type=int, default=None, help="override replications")
    p.add_argument("--B", type=int, default=None, help="override bootstrap size")
    p.add_argument("--only", default=None, help="run only the experiment with this name")
    return parser


def _cmd_test(args) -> int:
    model = _json_arg(args.model, "model")
    estimator = args.estimator or ("mle_gaussian" if model.get("name") == "gaussian"
                                   else "min_ksd_closed")
    if args.B < 1:
        raise UsageError("--B must be at least 1")
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    if args.seed < 0:
        raise UsageError("--seed must be nonnegative")
    kernel = parse_kernel({"kind": args.kernel, "bandwidth": args.bandwidth})
    test = TestConfig(kind=args.test, null=model, estimator=estimator,
                      kernel=kernel.to_dict() if not isinstance(kernel, str) else kernel,
                      pvalue_convention=args.pvalue_convention, mc_draws=args.mc_draws)
    if args.data is not None:
        report = run_single_test(test, data=read_data_csv(args.data), B=args.B,
                                 alpha=args.alpha, seed=args.seed)
    else:
        dgp = _json_arg(args.dgp, "dgp")
        try:
            spec = DgpSpec.from_dict({"n": args.n, **dgp})
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"invalid --dgp: {exc}") from None
        report = run_single_test(test, dgp=spec, B=args.B, alpha=args.alpha, seed=args.seed)
    doc = report.to_dict(include_replicates=not args.no_replicates)
    doc["test"] = args.test
    doc["model"] = model
    doc["estimator"] = estimator
    json.dump(doc, sys.stdout, indent=2)
    sys.stdout.write("\n")
    print(report.summary(), file=sys.stderr)
    return EXIT_OK


def _cmd_power(args) -> int:
    configs = load_config(args.config)
    if args.only:
        configs = [c for c in configs if c.name == args.only]
        if not configs:
            raise UsageError(f"no experiment named {args.only!r}")
    for cfg in configs:
        if args.R is not None:
            cfg.R = args.R
        if args.B is not None:
            cfg.B = args.B
        cfg.__post_init__()
        path = run_power_experiment(cfg, workers=max(1, args.workers), out_dir=args.out)
        print(f"{cfg.name}: wrote {path}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "test":
            return _cmd_test(args)
        return _cmd_power(args)
    except EstimationError as exc:
        print(f"sksd: estimator failure: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    except (UsageError, ConfigError) as exc:
        print(f"sksd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"sksd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
