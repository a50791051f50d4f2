from __future__ import annotations
from pathlib import Path
from typing import Iterable, TypeVar
import pandas as pd
from pydantic import BaseModel, ValidationError

from src.core.exceptions import SchemaMismatchError
from src.core.logger import logger
from src.core.models import SCHEMA_VERSION, ReplayEventJS, RunHeaderJS, TrialJS

# Run directory layout:
#   <run_dir>/header.json
#   <run_dir>/seed_<k>/trials.jsonl, steps.csv, replays.jsonl
HEADER_FILE = "header.json"
TRIALS_FILE = "trials.jsonl"
STEPS_FILE = "steps.csv"
REPLAYS_FILE = "replays.jsonl"

ModelT = TypeVar("ModelT", bound=BaseModel)


def write_jsonl(path: Path, records: Iterable[BaseModel]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(record.model_dump_json() + "\n")


def read_jsonl(path: Path, model: type[ModelT]) -> list[ModelT]:
    with path.open(encoding="utf-8") as f:
        return [model.model_validate_json(line) for line in f if line.strip()]


def write_csv(frame: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")


def seed_dir(run_dir: Path, seed: int) -> Path:
    return run_dir / f"seed_{seed}"


def write_header(run_dir: Path, header: RunHeaderJS) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / HEADER_FILE).write_text(header.model_dump_json(indent=2) + "\n", encoding="utf-8")


def read_header(run_dir: Path) -> RunHeaderJS:
    path = run_dir / HEADER_FILE
    if not path.is_file():
        raise SchemaMismatchError(f"'{run_dir}' has no {HEADER_FILE}, not a run directory.")
    try:
        return RunHeaderJS.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise SchemaMismatchError(
            f"'{path}' does not match schema version {SCHEMA_VERSION}: {e}"
        ) from e


def write_trials(run_dir: Path, seed: int, trials: list[TrialJS]) -> None:
    write_jsonl(seed_dir(run_dir, seed) / TRIALS_FILE, trials)


def write_replays(run_dir: Path, seed: int, events: list[ReplayEventJS]) -> None:
    write_jsonl(seed_dir(run_dir, seed) / REPLAYS_FILE, events)


def read_trials(run_dir: Path) -> dict[int, list[TrialJS]]:
    """Trials of every seed found under the run directory, by seed."""
    trials: dict[int, list[TrialJS]] = {}
    for path in sorted(run_dir.glob(f"seed_*/{TRIALS_FILE}")):
        seed = int(path.parent.name.removeprefix("seed_"))
        trials[seed] = read_jsonl(path, TrialJS)
    if not trials:
        logger.warning(f"No trial logs found under '{run_dir}'.")
    return dict(sorted(trials.items()))


def read_replays(run_dir: Path) -> dict[int, list[ReplayEventJS]]:
    events: dict[int, list[ReplayEventJS]] = {}
    for path in sorted(run_dir.glob(f"seed_*/{REPLAYS_FILE}")):
        seed = int(path.parent.name.removeprefix("seed_"))
        events[seed] = read_jsonl(path, ReplayEventJS)
    return dict(sorted(events.items()))
