#!/usr/bin/env python3
"""
Command-line entry point.

    python main.py run experiment.env
    python main.py sweep experiment.env --agents 10,20,40,80
    python main.py spectra experiment.env
    python main.py validate
"""

import argparse
import sys

from config import THREADS
from experiment_config import ConfigError, load_config_file
from graph import GraphError
from harness import format_report, run_experiment, spectra, sweep, validate_suite
from logger import get_logger

logger = get_logger('main')


def _threads(args) -> int:
    return 1 if args.deterministic else THREADS


def cmd_run(args) -> int:
    cfg = load_config_file(args.config)
    logger.info(cfg.get_config_summary())
    result = run_experiment(cfg, _threads(args), output=args.output)
    print(f"trace: {result.csv_path}")
    print(f"summary: {result.summary_path}")
    if not result.ok:
        print(f"{len(result.aborted)} of {cfg.trials} trials aborted")
        return 1
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config_file(args.config)
    agents = [int(value) for value in args.agents.split(',') if value.strip()]
    results, combined = sweep(cfg, agents, _threads(args))
    for result in results:
        print(f"N={result.config.n_agents}: {result.csv_path}")
    print(f"combined: {combined}")
    return 0 if all(result.ok for result in results) else 1


def cmd_spectra(args) -> int:
    cfg = load_config_file(args.config)
    for key, value in spectra(cfg).items():
        print(f"{key:>10}: {value:.10g}" if isinstance(value, float) else f"{key:>10}: {value}")
    return 0


def cmd_validate(args) -> int:
    results = validate_suite()
    print(format_report(results))
    return 0 if all(result.passed for result in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Zeroth-order primal-dual optimization simulator")
    parser.add_argument("--deterministic", action="store_true",
                        help="Run trials on a single thread (results are identical either way)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Execute an experiment and write its CSV trace")
    run.add_argument("config", help="Experiment document (KEY=VALUE lines)")
    run.add_argument("--output", help="Override the OUTPUT path of the document")
    run.set_defaults(handler=cmd_run)

    sweep_parser = sub.add_parser("sweep", help="Repeat an experiment over several network sizes")
    sweep_parser.add_argument("config")
    sweep_parser.add_argument("--agents", default="10,20,40,80", help="Comma-separated N values (default: 10,20,40,80)")
    sweep_parser.set_defaults(handler=cmd_sweep)

    spectra_parser = sub.add_parser("spectra", help="Print sigma_min, ||L+|| and theoretical c, rho_min, k")
    spectra_parser.add_argument("config")
    spectra_parser.set_defaults(handler=cmd_spectra)

    validate = sub.add_parser("validate", help="Run the fast invariant suite")
    validate.set_defaults(handler=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(f"Invalid experiment configuration: {e}")
        return 1
    except GraphError as e:
        logger.error(f"Topology construction failed: {e}")
        return 1
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return 1
    except KeyboardInterrupt:
        print("\nStopped by user (Ctrl+C)")
        return 130


if __name__ == "__main__":
    sys.exit(main())
