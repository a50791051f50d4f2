from __future__ import annotations
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator
import src.core.experiments  # noqa: F401
from src.core.logger import logger
from src.core.enums import ExperimentName
from src.core.router import router


def _check_experiment_consistency() -> None:
    """
    Checks at startup that every experiment name has both a per-seed
    handler and a summary handler registered, to fail fast.
    """
    logger.info("Verifying experiment registry...")
    tables = [("handler", router.routes), ("summary", router.summaries)]
    for description, table in tables:
        missing_members = [member.value for member in ExperimentName if member not in table]
        if missing_members:
            raise RuntimeError(
                f"Experiment registry check failed: no {description} registered for "
                f"{', '.join(missing_members)}"
            )
    logger.info("Experiment registry checks passed.")


@contextmanager
def lifespan(run_root: Path) -> Iterator[Path]:
    _check_experiment_consistency()
    run_root.mkdir(parents=True, exist_ok=True)
    logger.info(f"Writing artifacts under '{run_root}'.")
    yield run_root
    logger.info("Lifespan operations complete.")
