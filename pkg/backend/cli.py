"""Command-line entry point: run <config-or-preset>, list, batch <preset...>.

Exit codes: 0 success, 2 config error, 3 numerical flag raised.
"""
from pathlib import Path
from typing import List, Optional
import argparse
import asyncio
import logging
import sys

from config import settings
from exceptions import ConfigError
from logging_config import configure_logging
from presets import list_presets
from scenario_service import EXIT_CONFIG_ERROR, EXIT_OK, ScenarioService

logger = logging.getLogger(__name__)


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="wavesim",
        description="Time-modulated complex potential simulator",
    )
    parser.add_argument("--log-level", default=None, help="Override WAVESIM_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_overrides(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", type=Path, default=None, help="Output directory")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Dotted config override, e.g. potential.v0=5 (repeatable)",
        )

    run = sub.add_parser("run", help="Run one scenario from a preset name or YAML file")
    run.add_argument("source", help="Preset name or path to a scenario YAML file")
    add_overrides(run)
    run.add_argument("--dt", type=float, default=None, help="Override plan.dt")
    run.add_argument("--grid-n", type=int, default=None, help="Override grid.n")

    sub.add_parser("list", help="List the compiled-in presets")

    batch = sub.add_parser("batch", help="Run several presets concurrently")
    batch.add_argument("sources", nargs="+", help="Preset names or YAML files")
    add_overrides(batch)
    batch.add_argument("--jobs", type=int, default=None, help="Concurrent runs")
    return parser.parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    configure_logging(level=args.log_level)

    if args.command == "list":
        for name, description in list_presets():
            print(f"{name:<20} {description}")
        return EXIT_OK

    service = ScenarioService()
    try:
        if args.command == "run":
            outcome = service.run_source(args.source, args.overrides, args.out, args.dt, args.grid_n)
            print(f"{outcome.config.name}: exit {outcome.exit_code}, outputs in {outcome.output_directory}")
            return outcome.exit_code

        outcomes = asyncio.run(service.run_batch(
            args.sources, args.out or settings.OUTPUT_DIR, args.overrides, args.jobs
        ))
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        return EXIT_CONFIG_ERROR

    for outcome in outcomes:
        print(f"{outcome.config.name}: exit {outcome.exit_code}, outputs in {outcome.output_directory}")
    return max(outcome.exit_code for outcome in outcomes)


if __name__ == "__main__":
    sys.exit(main())
