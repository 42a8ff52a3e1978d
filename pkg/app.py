# app.py
"""
Command-line entry point.

    python app.py [--config PATH] [--seed INT] [--out DIR] [--pws MINUTES] [--dry-run] <command> ...

Commands: gen, train, predict, autoscale, place, simulate, report.
Exit codes: 0 success, 1 usage/config error, 2 runtime/infeasibility error.
"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from core.utils.config import SCENARIO_ORDER, RunConfig, load_config, with_overrides
from core.utils.error_handler import EXIT_OK, ConfigError, ErrorHandler
from core.utils.logging_utils import get_logger, set_level
from ui.commands import CommandRunner

logger = get_logger(__name__)

COMMANDS = ("gen", "train", "predict", "autoscale", "place", "simulate", "report")
TRAINERS = ("tade", "sade", "backprop")
ENGINES = ("GA", "BestFit", "RandomFit")


class CliArgumentParser(argparse.ArgumentParser):
    """Usage errors become ConfigError so they exit with the config/usage code."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS keeps a flag given before the command from being reset by the subparser
    flags = argparse.ArgumentParser(add_help=False)
    flags.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="YAML run configuration")
    flags.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed")
    flags.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory")
    flags.add_argument("--pws", type=int, default=argparse.SUPPRESS, help="prediction window size in minutes")
    flags.add_argument("--trace", type=Path, default=argparse.SUPPRESS, help="input trace file")
    flags.add_argument("--dry-run", action="store_true", default=argparse.SUPPRESS,
                       help="validate the configuration and write nothing")
    flags.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS, help="debug logging")
    return flags


def build_parser() -> argparse.ArgumentParser:
    flags = _global_flags()
    parser = CliArgumentParser(
        prog="proactive-rm",
        description="Proactive cloud resource management simulator",
        parents=[flags],
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    gen = sub.add_parser("gen", parents=[flags], help="write a synthetic workload trace")
    gen.add_argument("--tasks", type=int, help="number of synthetic VMs")
    gen.add_argument("--output", type=Path, help="trace file to write (default OUT/trace.csv)")

    train = sub.add_parser("train", parents=[flags], help="train one predictor per VM")
    train.add_argument("--trainer", choices=TRAINERS, default="tade")
    train.add_argument("--vm-id", action="append", dest="vm_ids", help="restrict to these VMs (repeatable)")
    train.add_argument("--gmax", type=int, help="maximum generations")

    predict = sub.add_parser("predict", parents=[flags], help="forecast the next interval from saved predictors")
    predict.add_argument("--predictors", type=Path, help="artifact directory (default OUT/predictors)")
    predict.add_argument("--vm-id", action="append", dest="vm_ids")

    autoscale = sub.add_parser("autoscale", parents=[flags], help="size VMs for one interval")
    autoscale.add_argument("--interval", type=int, help="interval index (default: last)")

    place = sub.add_parser("place", parents=[flags], help="autoscale then place one interval")
    place.add_argument("--interval", type=int)
    place.add_argument("--engine", choices=ENGINES)

    simulate = sub.add_parser("simulate", parents=[flags], help="run and compare scenarios")
    simulate.add_argument("--scenario", action="append", dest="scenarios", choices=SCENARIO_ORDER,
                          help="scenario to run (repeatable, default all)")
    simulate.add_argument("--engine", choices=ENGINES)
    simulate.add_argument("--max-intervals", type=int)

    report = sub.add_parser("report", parents=[flags], help="prediction comparison across window sizes")
    report.add_argument("--pws-set", type=int, nargs="+", help="window sizes in minutes")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file (or defaults) plus command-line overrides, validated once."""
    config = load_config(getattr(args, "config", None))
    overrides = {
        "seed": getattr(args, "seed", None),
        "out_dir": getattr(args, "out", None),
        "pws_minutes": getattr(args, "pws", None),
        "trace_path": getattr(args, "trace", None),
        "synth.tasks": getattr(args, "tasks", None),
        "tade.gmax": getattr(args, "gmax", None),
        "scenarios": getattr(args, "scenarios", None),
        "simulation.placement_engine": getattr(args, "engine", None) if args.command == "simulate" else None,
        "simulation.max_intervals": getattr(args, "max_intervals", None),
        "report.pws_set": getattr(args, "pws_set", None),
    }
    return with_overrides(config, **overrides)


def dispatch(runner: CommandRunner, args: argparse.Namespace) -> int:
    handlers = {
        "gen": lambda: runner.gen(args.output),
        "train": lambda: runner.train(args.trainer, args.vm_ids),
        "predict": lambda: runner.predict(args.predictors, args.vm_ids),
        "autoscale": lambda: runner.autoscale(args.interval),
        "place": lambda: runner.place(args.interval, args.engine),
        "simulate": runner.simulate,
        "report": runner.report,
    }
    return handlers[args.command]()


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        return ErrorHandler.handle_config_error(e)
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    if getattr(args, "verbose", False):
        set_level("DEBUG")
    try:
        config = resolve_config(args)
        runner = CommandRunner(config, dry_run=getattr(args, "dry_run", False))
        logger.info(f"Running '{args.command}' with seed={config.seed}, pws={config.pws_minutes} min")
        code = dispatch(runner, args)
    except Exception as e:
        return ErrorHandler.handle(e)
    return code if code is not None else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
