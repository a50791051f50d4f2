from __future__ import annotations
from pathlib import Path
from typing import TYPE_CHECKING
import pandas as pd

from src.agent.world_model import collect_dataset, learn, multi_predecessor_states, predecessor_pairs
from src.core.config import Settings, parse_tasks
from src.core.enums import ACTIONS, DatasetMode, ExperimentName, NetKind, StreamName
from src.core.logger import logger
from src.core.router import SummaryRow, router
from src.store.artifacts import write_csv

if TYPE_CHECKING:
    from src.core.context import ExperimentContext

LABEL = "galmo"


@router.route(ExperimentName.GALMO_GROWTH)
def galmo_growth(ctx: ExperimentContext) -> list[SummaryRow]:
    """Trains the predecessor ensembles on the exhaustive dataset of
    GROWTH_TASKS and reports how many experts each one grew."""
    s = ctx.settings
    tasks = parse_tasks(s.growth_tasks)
    samples = collect_dataset(
        ctx.mazes(tasks),
        tasks,
        DatasetMode.EXHAUSTIVE,
        encoding=s.encoding_config(),
        agent=s.agent_config(),
        log_prefix=ctx.log_prefix,
    )
    logger.info(
        f"{ctx.log_prefix}{len(multi_predecessor_states(samples))} (state, action) pairs "
        "have more than one true predecessor."
    )
    model = learn(
        samples,
        s.galmo_config(),
        ctx.rng(StreamName.GALMO),
        s.net_bundles(),
        s.reward_input,
        kinds=(NetKind.P,),
        log_prefix=ctx.log_prefix,
    )
    history_rows = []
    error_rows = []
    rows: list[SummaryRow] = []
    for action in ACTIONS:
        report = model.reports[(NetKind.P, action)]
        history_rows.extend(
            {"action": str(action), "epoch": epoch, "theta": theta, "experts": count}
            for epoch, (theta, count) in enumerate(zip(report.theta_history, report.expert_counts))
        )
        error_rows.extend(
            {"action": str(action), "epoch": epoch, "sample": i, "min_error": e, "experts": n}
            for epoch, i, e, n in report.error_rows
        )
        ensemble = model.predecessors[action]
        pairs = predecessor_pairs(samples, action)
        max_error = max((min(ensemble.errors(x, y)) for x, y in pairs), default=0.0)
        rows.append(
            {
                "seed": ctx.seed,
                "action": str(action),
                "experts": len(ensemble),
                "growth_events": len(report.growth_events),
                "max_error": max_error,
            }
        )
    write_csv(pd.DataFrame(history_rows), ctx.seed_dir(LABEL) / "growth.csv")
    write_csv(pd.DataFrame(error_rows), ctx.seed_dir(LABEL) / "errors.csv")
    return rows


@router.summary(ExperimentName.GALMO_GROWTH)
def summarize_galmo_growth(settings: Settings, run_root: Path, rows: list[SummaryRow]) -> list[Path]:
    frame = pd.DataFrame(rows, columns=["seed", "action", "experts", "growth_events", "max_error"])
    per_seed = (
        frame.groupby("seed", as_index=False)
        .agg(max_experts=("experts", "max"), total_experts=("experts", "sum"), max_error=("max_error", "max"))
    )
    ensembles_path = run_root / "ensembles.csv"
    summary_path = run_root / "summary.csv"
    write_csv(frame, ensembles_path)
    write_csv(per_seed, summary_path)
    logger.info(
        f"GALMO growth over {len(per_seed)} seeds: largest ensembles "
        f"{per_seed['max_experts'].tolist()}."
    )
    return [ensembles_path, summary_path]
