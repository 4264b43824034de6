"""Command-line front end."""

import argparse
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

from . import __version__
from .config import load_run_config, schema_paths
from .const import DOMAIN, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_UNCERTIFIED
from .exceptions import ConfigError, NumericalError, OracleUncertifiedError
from .pipeline import (
    baseline_job,
    compare_models_job,
    oracle_job,
    post_job,
    run_job,
    simulate_job,
)

_LOGGER = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# keys set through the global options rather than dotted flags
GLOBAL_KEYS = ("workers", "output_dir")

SHORT_FLAGS = {
    "--model": "model.kind",
    "--seed": "algorithm.seed",
    "--output-dir": "output_dir",
}

SIMULATE_FLAGS = {
    "--theta-true": "simulate.theta_true",
    "--sigma-true": "simulate.sigma_true",
    "--k": "simulate.k",
    "--planets": "simulate.planets",
}


def _add_flags(parser: argparse.ArgumentParser, flags: Dict[str, str]) -> None:
    """Add flags that set a dotted configuration key."""
    for flag, path in flags.items():
        parser.add_argument(
            flag, dest=path, default=argparse.SUPPRESS, metavar="VALUE", help=f"sets {path}"
        )


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """Add --config plus one flag per configuration leaf."""
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    _add_flags(parser, SHORT_FLAGS)
    for path in schema_paths():
        if path in GLOBAL_KEYS:
            continue
        parser.add_argument(
            f"--{path}", dest=path, default=argparse.SUPPRESS, metavar="VALUE"
        )


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Return the dotted overrides given on the command line."""
    known = set(schema_paths()) - {"workers"}
    overrides = {key: value for key, value in vars(args).items() if key in known}
    if args.workers is not None:
        overrides["workers"] = args.workers
    return overrides


def _config(args: argparse.Namespace, path: Optional[Path] = None) -> Dict[str, Any]:
    """Load the configuration named on the command line."""
    return load_run_config(path if path is not None else args.config, collect_overrides(args))


def cmd_simulate(args: argparse.Namespace) -> int:
    """Simulate a dataset."""
    simulate_job(_config(args))
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    """Run the tempered sampler and post-processing."""
    summary = run_job(_config(args))
    _LOGGER.info(
        "log Z_hat=%.6g sigma_ml=%.6g", summary["log_Z_hat"], summary["sigma_ml"]
    )
    return EXIT_OK


def cmd_run_baseline(args: argparse.Namespace) -> int:
    """Run the joint-space baseline."""
    summary = baseline_job(_config(args))
    _LOGGER.info("Baseline log Z_hat=%.6g", summary["log_Z_hat"])
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    """Compute the grid ground truth."""
    summary = oracle_job(_config(args))
    _LOGGER.info("Oracle log Z=%.8g sigma_ml=%.6g", summary.log_Z, summary.sigma_ml)
    return EXIT_OK


def cmd_compare_models(args: argparse.Namespace) -> int:
    """Compare the evidence of two models."""
    config_a = _config(args, args.config_a)
    config_b = _config(args, args.config_b)
    report = compare_models_job(config_a, config_b, args.seeds, args.true_model)
    _LOGGER.info("Median log B=%.4g", report["median_log_B"])
    return EXIT_OK


def cmd_post(args: argparse.Namespace) -> int:
    """Recompute post-processing for an existing run."""
    overrides = collect_overrides(args)
    overrides.pop("workers", None)
    post_job(args.run_dir, overrides)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    "simulate": cmd_simulate,
    "run": cmd_run,
    "run-baseline": cmd_run_baseline,
    "oracle": cmd_oracle,
    "compare-models": cmd_compare_models,
    "post": cmd_post,
}


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser with every subcommand."""
    parser = argparse.ArgumentParser(
        prog=DOMAIN,
        description="Adaptive importance sampling with automatic tempering",
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--workers", type=int, default=None, help="particle evaluation threads")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at debug level")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name, handler in COMMANDS.items():
        sub = subparsers.add_parser(
            name, help=(handler.__doc__ or "").strip(), allow_abbrev=False
        )
        sub.set_defaults(handler=handler)
        if name == "compare-models":
            sub.add_argument("--config-a", type=Path, required=True)
            sub.add_argument("--config-b", type=Path, required=True)
            sub.add_argument("--seeds", type=int, nargs="+", default=None)
            sub.add_argument("--true-model", choices=("a", "b"), default=None)
        if name == "post":
            sub.add_argument("--run-dir", type=Path, required=True)
        if name == "simulate":
            _add_flags(sub, SIMULATE_FLAGS)
        _add_config_arguments(sub)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return its exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT
    )
    try:
        return args.handler(args)
    except ConfigError as err:
        _LOGGER.error("Configuration error: %s", err)
        return EXIT_CONFIG
    except OracleUncertifiedError as err:
        _LOGGER.error("Oracle not certified: %s", err)
        return EXIT_UNCERTIFIED
    except NumericalError as err:
        _LOGGER.error("Numerical failure: %s", err)
        return EXIT_NUMERIC


def run() -> None:
    """Console-script entry point."""
    raise SystemExit(main())

