from __future__ import annotations
from pathlib import Path
from typing import TYPE_CHECKING
import pandas as pd

from src.agent.world_model import (
    WorldModel,
    collect_dataset,
    coverage_report,
    learn,
    matched_epochs,
    reward_errors,
    save_dataset,
)
from src.core.config import Settings, parse_tasks
from src.core.enums import DatasetMode, ExperimentName, ShuffleMode, StreamName, TaskId
from src.core.logger import logger
from src.core.router import SummaryRow, router
from src.store.artifacts import write_csv

if TYPE_CHECKING:
    from src.core.context import ExperimentContext

OFFLINE = "offline"
ONLINE = "online"
ERROR_COLUMNS = [
    "seed",
    "training",
    "task",
    "epochs",
    "max_error",
    "mean_error",
    "best_expert_max_error",
]
COVERAGE_COLUMNS = [
    "seed",
    "hit_rate",
    "mismatched_pairs",
    "multi_predecessor_exact",
    "multi_predecessor_pairs",
]


def _task_errors(
    ctx: ExperimentContext, model: WorldModel, tasks: list[TaskId], training: str, epochs: int
) -> list[SummaryRow]:
    s = ctx.settings
    rows: list[SummaryRow] = []
    for task in tasks:
        samples = collect_dataset(
            ctx.mazes([task]), [task], encoding=s.encoding_config(), agent=s.agent_config()
        )
        for task_id, errors in reward_errors(model, samples).items():
            rows.append(
                {
                    "seed": ctx.seed,
                    "training": training,
                    "task": int(task_id),
                    "epochs": epochs,
                    "max_error": errors.max_error,
                    "mean_error": errors.mean_error,
                    "best_expert_max_error": errors.best_expert_max_error,
                }
            )
    return rows


@router.route(ExperimentName.WORLDMODEL_ONLINE_VS_OFFLINE)
def worldmodel_online_vs_offline(ctx: ExperimentContext) -> list[SummaryRow]:
    """Reward-model accuracy after shuffled off-line training on the
    exhaustive dataset versus lap-ordered training on the experienced
    stream. Both arms see the same number of sample presentations."""
    s = ctx.settings
    tasks = parse_tasks(s.wm_tasks)
    mazes = ctx.mazes(tasks)

    offline_samples = collect_dataset(
        mazes, tasks, encoding=s.encoding_config(), agent=s.agent_config(), log_prefix=ctx.log_prefix
    )
    save_dataset(offline_samples, ctx.seed_dir(OFFLINE) / "dataset.jsonl")
    offline = learn(
        offline_samples,
        s.galmo_config(),
        ctx.rng(StreamName.GALMO),
        s.net_bundles(),
        s.reward_input,
        log_prefix=f"{ctx.log_prefix}[{OFFLINE}] ",
    )
    offline.save(ctx.seed_dir(OFFLINE) / "world_model")
    coverage = coverage_report(offline, offline_samples, s.gate_threshold, s.null_epsilon)
    logger.info(
        f"{ctx.log_prefix}Off-line predecessor coverage {coverage.hit_rate:.3f} "
        f"({coverage.multi_predecessor_hits}/{len(coverage.multi_predecessor)} "
        "multi-predecessor pairs exact)."
    )

    online_samples = collect_dataset(
        mazes,
        tasks,
        DatasetMode.BEHAVIORAL,
        encoding=s.encoding_config(),
        agent=s.agent_config(),
        rng=ctx.rng(StreamName.DATASET),
        q=ctx.new_q_bank(),
        n_laps=s.behavioral_laps,
        dedup=False,
        log_prefix=ctx.log_prefix,
    )
    online_epochs = matched_epochs(len(offline_samples), s.max_epoch, len(online_samples))
    logger.info(
        f"{ctx.log_prefix}On-line stream of {len(online_samples)} samples runs {online_epochs} "
        f"epochs to match {s.max_epoch} epochs over {len(offline_samples)} samples."
    )
    online_config = s.galmo_config(shuffle=ShuffleMode.NONE).model_copy(
        update={"max_epoch": online_epochs}
    )
    online = learn(
        online_samples,
        online_config,
        ctx.rng(StreamName.GALMO),
        s.net_bundles(),
        s.reward_input,
        log_prefix=f"{ctx.log_prefix}[{ONLINE}] ",
    )
    rows = _task_errors(ctx, offline, tasks, OFFLINE, s.max_epoch) + _task_errors(
        ctx, online, tasks, ONLINE, online_epochs
    )
    rows.append(
        {
            "seed": ctx.seed,
            "training": OFFLINE,
            "hit_rate": coverage.hit_rate,
            "mismatched_pairs": len(coverage.mismatches),
            "multi_predecessor_exact": coverage.multi_predecessor_hits,
            "multi_predecessor_pairs": len(coverage.multi_predecessor),
        }
    )
    return rows


@router.summary(ExperimentName.WORLDMODEL_ONLINE_VS_OFFLINE)
def summarize_worldmodel(settings: Settings, run_root: Path, rows: list[SummaryRow]) -> list[Path]:
    errors = pd.DataFrame([r for r in rows if "task" in r], columns=ERROR_COLUMNS)
    coverage = pd.DataFrame([r for r in rows if "hit_rate" in r], columns=COVERAGE_COLUMNS)
    table = errors.groupby(["training", "task"], as_index=False).agg(
        max_error=("max_error", "max"),
        mean_error=("mean_error", "mean"),
        best_expert_max_error=("best_expert_max_error", "max"),
    )
    errors_path = run_root / "reward_errors.csv"
    summary_path = run_root / "summary.csv"
    coverage_path = run_root / "coverage.csv"
    write_csv(errors, errors_path)
    write_csv(table, summary_path)
    write_csv(coverage, coverage_path)
    return [errors_path, summary_path, coverage_path]
