"""CLI entry point for the Møller workbench."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import anyio
import numpy as np

from moller_workbench.config import apply_overrides, load_config
from moller_workbench.errors import (
    BoundaryError,
    BundleMismatchError,
    CausalDomainError,
    ConfigurationError,
    NumericFailure,
    OracleCapError,
    ShapeError,
)
from moller_workbench.orchestrator import Orchestrator

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

COMMANDS = ["verify", "scenario", "state", "quantize", "status"]
CONFIG_ERRORS = (
    ConfigurationError,
    OracleCapError,
    CausalDomainError,
    BoundaryError,
    ShapeError,
    BundleMismatchError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moller-workbench",
        description="Classical Møller maps of Dirac fields in compact U(1) backgrounds",
    )
    parser.add_argument("command", choices=COMMANDS, help="Command to run")
    parser.add_argument(
        "--config",
        required=True,
        help="Path to workbench configuration JSON file",
    )
    parser.add_argument("--seed", type=int, help="Root seed of every battery")
    parser.add_argument("--out", help="Directory for reports and dumps")
    parser.add_argument(
        "--dense",
        action="store_true",
        help="Run dense oracle checks on the main grid",
    )
    parser.add_argument(
        "--tol",
        type=float,
        help="Tolerance for composed and functional-algebra identities",
    )
    parser.add_argument(
        "--suite",
        action="append",
        choices=Orchestrator.SUITES,
        help="Run only this suite (repeatable; verify only)",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Log at DEBUG level")
    return parser


def _run(orchestrator: Orchestrator, command: str, suites: Optional[List[str]]) -> int:
    if command == "status":
        status = orchestrator.get_status()
        if status:
            print(json.dumps(status, indent=2))
        else:
            print("No run recorded yet")
        return EXIT_OK

    if command == "verify":
        report = anyio.run(orchestrator.run_suites, suites)
        for suite in report.suites:
            print(f"{suite.suite:12s} {suite.status}")
            for check in suite.checks:
                if not check.passed:
                    print(f"  {check.identity}: {check.max_residual:.3e} > {check.tolerance:.1e}")
        if any(s.status == "error" and s.error_kind == "configuration" for s in report.suites):
            return EXIT_CONFIG
        if any(s.status == "error" for s in report.suites):
            return EXIT_NUMERIC
        return EXIT_OK if report.passed else EXIT_FAILED

    if command == "scenario":
        report = orchestrator.run_scenario()
        print(f"Wrote {sum(len(s['files']) for s in report['sources'])} dumps")
        return EXIT_OK

    runner = orchestrator.run_state if command == "state" else orchestrator.run_quantize
    report = runner()
    return EXIT_OK if report["passed"] else EXIT_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point.

    Returns:
        0 when every identity passes, 1 on an identity failure, 2 on an
        invalid configuration and 3 on a numeric failure.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    config_path = Path(args.config)
    if not config_path.exists():
        print(f"Error: Config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        config = apply_overrides(
            load_config(config_path),
            seed=args.seed,
            tolerance=args.tol,
            work_dir=args.out,
            dense=args.dense,
        )
        orchestrator = Orchestrator(config)
        return _run(orchestrator, args.command, args.suite)
    except CONFIG_ERRORS as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, np.linalg.LinAlgError) as e:
        print(f"Numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as e:
        logging.getLogger(__name__).exception("unexpected failure")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
