from __future__ import annotations
from pathlib import Path
from typing import TYPE_CHECKING
import pandas as pd

from src.agent.dynaq import ScheduleEntry
from src.analysis.replays import chance_rate, direction_proportions, pool_runs, summarize
from src.core.config import Settings, parse_schedule
from src.core.enums import ExperimentName, Phase, StreamName, TaskId
from src.core.logger import logger
from src.core.router import SummaryRow, router
from src.core.seeding import stream
from src.maze.env import load_maze
from src.store.artifacts import read_replays, write_csv

if TYPE_CHECKING:
    from src.core.context import ExperimentContext

LABEL = "dynaq"
RECORDING_TASKS = (TaskId.RIGHT, TaskId.LEFT, TaskId.ALTERNATION)
CHANCE_WINDOWS = 200_000


def recording_schedule(settings: Settings) -> list[ScheduleEntry]:
    """Pre-training followed by recording sessions; each session switches
    contingency once, cycling over tasks 3, 4 and 5."""
    pretraining_text = settings.schedule or settings.pretraining_schedule
    schedule = [ScheduleEntry(task, n) for task, n in parse_schedule(pretraining_text)]
    first = round(settings.session_trials * settings.switch_fraction)
    for session in range(settings.recording_sessions):
        before = RECORDING_TASKS[session % len(RECORDING_TASKS)]
        after = RECORDING_TASKS[(session + 1) % len(RECORDING_TASKS)]
        if first > 0:
            schedule.append(ScheduleEntry(before, first, Phase.RECORDING))
        if settings.session_trials - first > 0:
            schedule.append(ScheduleEntry(after, settings.session_trials - first, Phase.RECORDING))
    return schedule


@router.route(ExperimentName.REPLAY_STATS)
def replay_stats(ctx: ExperimentContext) -> list[SummaryRow]:
    s = ctx.settings
    log = ctx.run_agent(LABEL, recording_schedule(s), s.agent_config(), with_replays=True)
    return [
        {
            "seed": ctx.seed,
            "trials": len(log.trials),
            "stops": len({e.stop for e in log.replay_events}),
            "replay_events": len(log.replay_events),
        }
    ]


@router.summary(ExperimentName.REPLAY_STATS)
def summarize_replay_stats(settings: Settings, run_root: Path, rows: list[SummaryRow]) -> list[Path]:
    """Pools every seed's replay events and classifies them."""
    maze = load_maze(settings.maze_file)
    events = pool_runs(read_replays(run_root / LABEL))
    summary = summarize(events, maze, match_memory=settings.match_memory)
    directions = direction_proportions(summary).reset_index()
    chance = chance_rate(
        maze, CHANCE_WINDOWS, stream(settings.seed, StreamName.ENV), settings.match_memory
    )
    logger.info(f"Pooled {len(events)} replay events; chance sequence rate {chance:.5f}.")
    runs_path = run_root / "runs.csv"
    summary_path = run_root / "replay_summary.csv"
    directions_path = run_root / "replay_directions.csv"
    chance_path = run_root / "chance.csv"
    write_csv(pd.DataFrame(rows), runs_path)
    write_csv(summary, summary_path)
    write_csv(directions, directions_path)
    write_csv(pd.DataFrame([{"windows": CHANCE_WINDOWS, "rate": chance}]), chance_path)
    return [runs_path, summary_path, directions_path, chance_path]
