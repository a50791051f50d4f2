# Built-ins
import argparse
import sys
from pathlib import Path
from typing import Any

# Local code
from src.core.config import load_settings, parse_overrides
from src.core.enums import ExperimentName, String
from src.core.exceptions import ConfigError, MazeError, RunawayGrowthError, SchemaMismatchError
from src.core.logger import logger

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

# python -m src.main run --experiment galmo-growth --seeds 10


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="replay-dynaq",
        description="Prioritized-sweeping neural Dyna-Q on a double-T maze.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one experiment over one or more seeds")
    run.add_argument(
        "--experiment",
        required=True,
        choices=[name.value for name in ExperimentName],
    )
    run.add_argument("--config", type=Path, help="key=value file, keys as in the environment")
    run.add_argument("--seed", type=int, help="master seed (SEED)")
    run.add_argument("--seeds", type=int, help="number of consecutive seeds (SEEDS)")
    run.add_argument("--out", type=Path, help="output directory (DYNAQ_OUT_DIR)")
    run.add_argument("--workers", type=int, help="parallel seed workers (WORKERS)")
    run.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any configuration key, may be repeated",
    )

    compare = commands.add_parser("compare", help="compare the error curves of two run directories")
    compare.add_argument("run_a", type=Path)
    compare.add_argument("run_b", type=Path)
    compare.add_argument("--out", type=Path, help="CSV file for the trial-aligned comparison")
    compare.add_argument("--window", type=int, default=20, help="moving-average window")
    return parser


def _run_command(args: argparse.Namespace) -> int:
    from src.core.runner import run

    overrides: dict[str, Any] = parse_overrides(args.overrides)
    overrides["EXPERIMENT"] = args.experiment
    for key, value in (
        ("SEED", args.seed),
        ("SEEDS", args.seeds),
        ("OUT_DIR", args.out),
        ("WORKERS", args.workers),
    ):
        if value is not None:
            overrides[key] = value
    settings = load_settings(args.config, overrides)
    logger.setLevel(settings.log_level.upper())
    run_root = run(settings)
    print(f"{String.ARTIFACTS_WRITTEN} {run_root}")
    return EXIT_OK


def _compare_command(args: argparse.Namespace) -> int:
    from src.analysis.compare import compare_runs
    from src.store.artifacts import write_csv

    report = compare_runs(args.run_a, args.run_b, args.window)
    if args.out is not None:
        write_csv(report.curves, args.out)
    if report.identical:
        print(f"{String.RUNS_ARE_IDENTICAL}.")
    else:
        print(
            f"{String.RUNS_DIFFER} {len(report.diff)} trials "
            f"(AUC {report.label_a}: {report.auc_a:.2f}, {report.label_b}: {report.auc_b:.2f})."
        )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _run_command(args)
        return _compare_command(args)
    except (ConfigError, MazeError, SchemaMismatchError) as e:
        logger.error(f"{String.CONFIGURATION_ERROR_DETECTED}: {e}")
        print(f"{String.USAGE_ERROR}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except RunawayGrowthError as e:
        logger.error(f"{String.RUNAWAY_GROWTH} '{e.checkpoint}': {e}")
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(f"{String.RUNTIME_FAILURE}: {e}", exc_info=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
