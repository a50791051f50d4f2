from __future__ import annotations
from pathlib import Path
from typing import TYPE_CHECKING
import pandas as pd

from src.agent.dynaq import ScheduleEntry
from src.analysis.compare import learning_curve, mean_curve, trials_to_threshold
from src.core.config import Settings, parse_schedule
from src.core.enums import ExperimentName, TaskId
from src.core.logger import logger
from src.core.router import SummaryRow, router
from src.store.artifacts import read_trials, write_csv

if TYPE_CHECKING:
    from src.core.context import ExperimentContext

QLEARNING = "qlearning"
DYNAQ = "dynaq"


def default_schedule(settings: Settings) -> list[ScheduleEntry]:
    if settings.schedule:
        return [ScheduleEntry(task, n) for task, n in parse_schedule(settings.schedule)]
    return [ScheduleEntry(TaskId.ALTERNATION, settings.max_trials)]


@router.route(ExperimentName.QLEARNING_VS_DYNAQ)
def qlearning_vs_dynaq(ctx: ExperimentContext) -> list[SummaryRow]:
    """The same agent without replays (B = 0) and with prioritized-sweeping
    replays at reward stops."""
    s = ctx.settings
    schedule = default_schedule(s)
    rows: list[SummaryRow] = []
    for label, budget in ((QLEARNING, 0), (DYNAQ, s.replay_budget)):
        log = ctx.run_agent(label, schedule, s.agent_config(replay_budget=budget), budget > 0)
        curve = learning_curve(log.trials, s.curve_window)
        reached = curve.index[curve <= s.error_threshold]
        rows.append(
            {
                "seed": ctx.seed,
                "label": label,
                "trials": len(log.trials),
                "error_rate": float(log.error_rates().mean()) if log.trials else 0.0,
                "trials_to_threshold": int(reached[0]) if len(reached) else None,
                "replay_events": len(log.replay_events),
            }
        )
    return rows


@router.summary(ExperimentName.QLEARNING_VS_DYNAQ)
def summarize_qlearning_vs_dynaq(
    settings: Settings, run_root: Path, rows: list[SummaryRow]
) -> list[Path]:
    runs_path = run_root / "runs.csv"
    curves_path = run_root / "learning_curves.csv"
    summary_path = run_root / "summary.csv"
    write_csv(pd.DataFrame(rows), runs_path)
    curves = []
    summary = []
    for label in (QLEARNING, DYNAQ):
        curve = mean_curve(read_trials(run_root / label), settings.curve_window)
        curves.append(curve.assign(label=label))
        threshold_trial = trials_to_threshold(curve, settings.error_threshold)
        summary.append(
            {
                "label": label,
                "trials_to_threshold": threshold_trial,
                "auc": float(curve["mean"].sum()),
                "final_error": float(curve["mean"].iloc[-1]) if len(curve) else None,
            }
        )
        logger.info(f"{label}: mean curve reaches {settings.error_threshold} at trial {threshold_trial}.")
    write_csv(pd.concat(curves, ignore_index=True)[["label", "trial", "mean", "std", "runs"]], curves_path)
    write_csv(pd.DataFrame(summary), summary_path)
    return [runs_path, curves_path, summary_path]
