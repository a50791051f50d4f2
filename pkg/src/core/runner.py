from __future__ import annotations
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from src.core.config import Settings
from src.core.context import ExperimentContext
from src.core.enums import ExperimentName
from src.core.exceptions import RunawayGrowthError
from src.core.lifespan import lifespan
from src.core.logger import logger
from src.core.models import RunHeaderJS
from src.core.router import SummaryRow, router
from src.core.seeding import run_seeds
from src.store.artifacts import REPLAYS_FILE, TRIALS_FILE, seed_dir, write_header

RUNAWAY_CHECKPOINT = "runaway_ensemble.json"


def run_seed(experiment: ExperimentName, settings: Settings, seed: int, run_root: Path) -> list[SummaryRow]:
    ctx = ExperimentContext(settings, seed, run_root)
    try:
        return router.process(experiment, ctx)
    except RunawayGrowthError as e:
        path = seed_dir(run_root, seed) / RUNAWAY_CHECKPOINT
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(e.ensemble.to_record(settings.galmo_w).model_dump_json(), encoding="utf-8")
        logger.error(f"{ctx.log_prefix}{e} Ensemble checkpoint dumped to '{path}'.")
        raise RunawayGrowthError(str(e), e.ensemble, path) from e


def _write_headers(experiment: ExperimentName, settings: Settings, run_root: Path) -> None:
    config = settings.dump_effective_config()
    write_header(
        run_root,
        RunHeaderJS(experiment=experiment, label="", seed=settings.seed, config=config),
    )
    for label_dir in sorted(p for p in run_root.iterdir() if p.is_dir()):
        has_logs = any(label_dir.glob(f"seed_*/{TRIALS_FILE}")) or any(
            label_dir.glob(f"seed_*/{REPLAYS_FILE}")
        )
        if has_logs:
            write_header(
                label_dir,
                RunHeaderJS(
                    experiment=experiment, label=label_dir.name, seed=settings.seed, config=config
                ),
            )


def run(settings: Settings) -> Path:
    """Runs every seed of the configured experiment, merges the per-seed
    rows in seed order and writes the experiment summaries."""
    if settings.experiment is None:
        raise ValueError("No experiment selected.")
    experiment = ExperimentName(settings.experiment)
    run_root = settings.out_dir / experiment
    seeds = run_seeds(settings.seed, settings.seeds)
    with lifespan(run_root):
        logger.info(
            f"Initializing experiment '{experiment}' for seeds {seeds} "
            f"with {settings.workers} worker(s)..."
        )
        rows: list[SummaryRow] = []
        if settings.workers > 1 and len(seeds) > 1:
            with ProcessPoolExecutor(max_workers=min(settings.workers, len(seeds))) as pool:
                futures = [pool.submit(run_seed, experiment, settings, seed, run_root) for seed in seeds]
                for future in futures:
                    rows.extend(future.result())
        else:
            for seed in seeds:
                rows.extend(run_seed(experiment, settings, seed, run_root))
        _write_headers(experiment, settings, run_root)
        written = router.summarize(experiment, settings, run_root, rows)
        logger.info(f"Successfully finished '{experiment}', wrote {len(written)} summary files.")
    return run_root
