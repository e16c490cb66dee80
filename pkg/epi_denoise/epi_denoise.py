"""Denoise one-bit epidemic test results on contact graphs.

This module provides the command-line interface. Every experiment subcommand
reads an optional config file, applies the flags on top of it, runs the
scenario and writes a detail report plus an aggregate report.
"""

import argparse
import sys
from typing import Any, Dict

from ._version import __version__
from .errors import ConfigError, EpiDenoiseError, InputDataError
from .parser import ConfigParser, build_config
from .runner import EXIT_CONFIG_ERROR, ExperimentRunner

COMMAND_SCENARIOS = {
    "denoise": "denoise",
    "forecast": "forecast",
    "params": "params",
    "missing": "missing",
    "fp": "false_positive",
    "county": "county_smooth",
    "bounds": "bounds",
    "simulate": "simulate",
}


def _add_common_arguments(command: argparse.ArgumentParser) -> None:
    command.add_argument(
        "-c",
        "--config",
        help="""
Experiment config file: a JSON object or 'key = value' lines.
Flags given on the command line override file values.
""",
    )
    command.add_argument("-s", "--seed", type=int, help="Base random seed.")
    command.add_argument(
        "-r", "--replicates", type=int, help="Number of Monte-Carlo replicates."
    )
    command.add_argument(
        "-o",
        "--out",
        help="""
Detail report path. The aggregate report is written next to it
as <stem>_aggregate<suffix>.
Default: report.csv
""",
    )
    command.add_argument(
        "--lambda",
        dest="lam",
        type=float,
        help="Fixed regularization level (implies --lambda-policy fixed).",
    )
    command.add_argument(
        "--lambda-policy",
        choices=["fixed", "theory", "theory-missing", "cv"],
        help="""
How lambda is chosen.
Options:
* fixed: use --lambda
* theory: sqrt(2) rho / n * log(4 n^2 / delta)
* theory-missing: 9 sqrt(2) rho log(n) / n
* cv: node-holdout cross-validation over a log grid
Default: cv
""",
    )
    command.add_argument(
        "--delta", type=float, help="Failure probability for the theory policy."
    )
    command.add_argument(
        "--alpha",
        type=float,
        nargs="+",
        help="False-positive rate(s) of the tests, each in [0, 1).",
    )
    command.add_argument("--tol", type=float, help="ADMM residual tolerance.")
    command.add_argument("--max-iter", type=int, help="ADMM iteration budget.")
    command.add_argument(
        "--one-based",
        action="store_true",
        default=None,
        help="Node ids in the edge list start at 1.",
    )
    command.add_argument(
        "--unchecked",
        action="store_true",
        default=None,
        help="Warn instead of failing when gamma >= 1 or beta * row sum >= 1.",
    )
    command.add_argument(
        "--shared-lambda",
        action="store_true",
        default=None,
        help="Fit lambda on the first replicate and reuse it for the others.",
    )
    command.add_argument(
        "-w", "--workers", type=int, help="Replicates run in parallel. Default: 1"
    )
    command.add_argument(
        "-f",
        "--format",
        choices=["csv", "jsonl"],
        help="Report format. Default: csv",
    )
    command.add_argument(
        "-q",
        "--quiet",
        action="store_true",
        help="Do not show logs on the terminal screen.",
    )
    command.add_argument("-l", "--log-file", help="Also write the log to this file.")


def create_cli() -> argparse.Namespace:
    """Define CLI command flags using argparse.

    Returns
    -------
        parser.parse_args: Argparse commands
    """
    formatter = argparse.RawTextHelpFormatter
    parser = argparse.ArgumentParser(
        description="Denoise one-bit epidemic test results on contact graphs.",
        formatter_class=formatter,
    )

    subparsers = parser.add_subparsers(dest="command")
    commands = {
        "denoise": subparsers.add_parser(
            "denoise", help="Compare TV denoising with raw test results."
        ),
        "forecast": subparsers.add_parser(
            "forecast", help="Forecast infections from denoised states."
        ),
        "params": subparsers.add_parser(
            "params", help="Estimate beta, gamma and R0 from a window of tests."
        ),
        "missing": subparsers.add_parser(
            "missing", help="Denoise with a fraction of nodes unobserved."
        ),
        "fp": subparsers.add_parser(
            "fp", help="Denoise tests with false positives and threshold."
        ),
        "county": subparsers.add_parser(
            "county", help="Smooth county prevalence weighted by population."
        ),
        "bounds": subparsers.add_parser(
            "bounds", help="Print spectral quantities and theoretical lambdas."
        ),
        "simulate": subparsers.add_parser(
            "simulate", help="Write one simulated outbreak, its tests and its graph."
        ),
    }
    version = subparsers.add_parser("version", help="Print epi-denoise version.")

    for command in commands.values():
        _add_common_arguments(command)

    for name in ("forecast", "simulate"):
        commands[name].add_argument(
            "--horizon", type=int, help="Forecast horizon in steps. Default: 2"
        )
    commands["params"].add_argument(
        "--window", type=int, help="Number of snapshots used. Default: 10"
    )
    commands["params"].add_argument(
        "--noiseless",
        action="store_true",
        default=None,
        help="Estimate from the true states instead of test results.",
    )
    for name in ("missing", "simulate"):
        commands[name].add_argument(
            "--missing-fraction",
            type=float,
            nargs="+",
            help="Fraction(s) of nodes left unobserved, each in [0, 1).",
        )
    commands["fp"].add_argument(
        "--rescale",
        dest="fp_rescale",
        action="store_true",
        default=None,
        help="Map surviving estimates x to (x - alpha) / (1 - alpha).",
    )
    commands["county"].add_argument("--cases", help="CSV: county_id,population,cases")
    commands["county"].add_argument(
        "--adjacency", help="County adjacency: two county ids per line."
    )

    # define version subparser
    version.add_argument("-v", "--verbose", action="store_true")

    args = parser.parse_args()
    return args


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Map parsed flags to config keys; flags that were not given are None."""
    flag_keys = {
        "seed": "seed",
        "replicates": "replicates",
        "out": "out",
        "lam": "lambda",
        "lambda_policy": "lambda_policy",
        "delta": "delta",
        "alpha": "alpha",
        "tol": "tol",
        "max_iter": "max_iter",
        "one_based": "one_based",
        "unchecked": "unchecked",
        "shared_lambda": "shared_lambda",
        "workers": "workers",
        "format": "format",
        "horizon": "horizon",
        "window": "window",
        "noiseless": "noiseless",
        "missing_fraction": "missing_fraction",
        "fp_rescale": "fp_rescale",
        "cases": "cases",
        "adjacency": "adjacency",
    }
    return {key: getattr(args, flag, None) for flag, key in flag_keys.items()}


def main() -> None:
    """Execute it all."""
    sys.tracebacklimit = -1
    args = create_cli()

    if args.command == "version":
        if args.verbose:
            print(f"epi-denoise version: {__version__}")
        else:
            print(__version__)
        return
    if args.command is None:
        print("No command specified, see 'epi --help'.")
        sys.exit(EXIT_CONFIG_ERROR)

    try:
        raw = ConfigParser(args.config).config if args.config else {}
        cfg = build_config(
            COMMAND_SCENARIOS[args.command], raw, collect_overrides(args)
        )
    except (ConfigError, FileNotFoundError) as exc:
        print(f"Config error: {exc}", file=sys.stderr)
        sys.exit(EXIT_CONFIG_ERROR)

    runner = ExperimentRunner(args.quiet, args.log_file)
    try:
        exit_code = runner.run(cfg)
    except ConfigError as exc:
        runner.logger.error("Config error: %s", exc)
        sys.exit(EXIT_CONFIG_ERROR)
    except (InputDataError, FileNotFoundError) as exc:
        runner.logger.error("Input error: %s", exc)
        sys.exit(EXIT_CONFIG_ERROR)
    except EpiDenoiseError as exc:
        runner.logger.error("%s", exc)
        sys.exit(1)
    sys.exit(exit_code)


if __name__ == "__main__":
    main()
