from __future__ import annotations
from collections import Counter
from dataclasses import dataclass
from itertools import groupby
import numpy as np
import pandas as pd

from src.core.enums import Phase, ReplayDirection, ReplaySide, TaskId, Zone
from src.core.logger import logger
from src.core.models import ReplayEventJS
from src.maze.env import Maze, decode_memory, lap_edges

MIN_SEQUENCE_LENGTH = 3
SUMMARY_COLUMNS = ["task", "direction", "side", "count", "proportion"]
# side label of events outside any sequence
NO_SIDE = "none"


@dataclass
class ReplaySequence:
    stop: int
    events: list[ReplayEventJS]
    direction: ReplayDirection

    @property
    def cells(self) -> list[int]:
        return [e.decoded_cell for e in self.events if e.decoded_cell is not None]

    @property
    def length(self) -> int:
        return len(self.events)

    @property
    def agent_cell(self) -> int:
        return self.events[0].agent_cell

    @property
    def task(self) -> TaskId:
        return self.events[0].task


class SequenceDetector:
    """Chains consecutive replay events of one stop into forward or
    backward sequences along the usual direction of travel."""

    def __init__(self, maze: Maze, match_memory: bool = True):
        self.maze = maze
        self.match_memory = match_memory
        self.edges = lap_edges(maze)

    def link(self, a: ReplayEventJS, b: ReplayEventJS) -> ReplayDirection | None:
        """Direction of the step from event a to event b, None if they do not chain."""
        ca, cb = a.decoded_cell, b.decoded_cell
        if ca is None or cb is None or ca == cb or not self.maze.are_adjacent(ca, cb):
            return None
        if self.match_memory and decode_memory(np.asarray(a.state)) != decode_memory(np.asarray(b.state)):
            return None
        if (ca, cb) in self.edges:
            return ReplayDirection.FORWARD
        if (cb, ca) in self.edges:
            return ReplayDirection.BACKWARD
        return None

    def detect_stop(self, events: list[ReplayEventJS]) -> list[ReplaySequence]:
        events = sorted(events, key=lambda e: e.replay_index)
        sequences: list[ReplaySequence] = []
        i = 0
        while i < len(events):
            direction: ReplayDirection | None = None
            j = i
            while j + 1 < len(events):
                step_direction = self.link(events[j], events[j + 1])
                if step_direction is None or (direction is not None and step_direction != direction):
                    break
                direction = step_direction
                j += 1
            if direction is not None and j - i + 1 >= MIN_SEQUENCE_LENGTH:
                sequences.append(ReplaySequence(events[i].stop, events[i : j + 1], direction))
                i = j + 1
            else:
                i += 1
        return sequences


def detect_sequences(
    events: list[ReplayEventJS], maze: Maze, match_memory: bool = True
) -> list[ReplaySequence]:
    """Greedy longest chains of at least three events, never spanning two stops."""
    detector = SequenceDetector(maze, match_memory)
    sequences: list[ReplaySequence] = []
    by_stop = sorted(events, key=lambda e: (e.stop, e.replay_index))
    for _, stop_events in groupby(by_stop, key=lambda e: e.stop):
        sequences.extend(detector.detect_stop(list(stop_events)))
    return sequences


def pool_runs(runs: dict[int, list[ReplayEventJS]]) -> list[ReplayEventJS]:
    """Events of several seeds in one list, stops renumbered so that no two
    seeds share a stop index."""
    pooled: list[ReplayEventJS] = []
    offset = 0
    for seed in sorted(runs):
        events = runs[seed]
        pooled.extend(e.model_copy(update={"stop": e.stop + offset}) for e in events)
        if events:
            offset += max(e.stop for e in events) + 1
    return pooled


def classify_side(sequence: ReplaySequence, agent_cell: int, maze: Maze) -> ReplaySide:
    """Majority zone of the replayed cells against the agent's zone; ties
    and central majorities are central."""
    counts = Counter(maze.zones[c] for c in sequence.cells)
    if not counts:
        return ReplaySide.CENTRAL
    ranked = counts.most_common()
    if len(ranked) > 1 and ranked[0][1] == ranked[1][1]:
        return ReplaySide.CENTRAL
    zone = ranked[0][0]
    if zone == Zone.CENTRAL:
        return ReplaySide.CENTRAL
    if zone == maze.zones[agent_cell]:
        return ReplaySide.SAME
    return ReplaySide.OPPOSITE


def summarize(
    events: list[ReplayEventJS],
    maze: Maze,
    tasks: list[TaskId] | None = None,
    match_memory: bool = True,
) -> pd.DataFrame:
    """Share of replayed events per task falling in backward sequences,
    forward sequences (split by side) or neither. Restricted to recording
    events when the log has any."""
    if any(e.phase == Phase.RECORDING for e in events):
        events = [e for e in events if e.phase == Phase.RECORDING]
    rows: list[dict[str, object]] = []
    for task in tasks or sorted({e.task for e in events}):
        task_events = [e for e in events if e.task == task]
        if not task_events:
            logger.warning(f"No replay events for task {int(task)}, skipping it in the summary.")
            continue
        total = len(task_events)
        counts: Counter[tuple[ReplayDirection, str]] = Counter()
        in_sequences = 0
        for seq in detect_sequences(task_events, maze, match_memory):
            counts[(seq.direction, str(classify_side(seq, seq.agent_cell, maze)))] += seq.length
            in_sequences += seq.length
        counts[(ReplayDirection.RANDOM, NO_SIDE)] = total - in_sequences
        for direction in ReplayDirection:
            sides = [NO_SIDE] if direction == ReplayDirection.RANDOM else [str(s) for s in ReplaySide]
            for side in sides:
                count = counts[(direction, side)]
                rows.append(
                    {
                        "task": int(task),
                        "direction": str(direction),
                        "side": side,
                        "count": count,
                        "proportion": count / total,
                    }
                )
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def direction_proportions(summary: pd.DataFrame) -> pd.DataFrame:
    """task x direction table of proportions."""
    table = summary.pivot_table(
        index="task", columns="direction", values="proportion", aggfunc="sum", fill_value=0.0
    )
    return table.reindex(columns=[str(d) for d in ReplayDirection], fill_value=0.0)


def chance_rate(
    maze: Maze,
    n_windows: int,
    rng: np.random.Generator,
    match_memory: bool = True,
) -> float:
    """Fraction of uniformly drawn three-state windows (cell x full reward
    history) that the detector would call a sequence."""
    detector = SequenceDetector(maze, match_memory)
    memories = [(1.0, 0.0), (0.0, 1.0), (1.0, 0.5), (0.5, 1.0)]
    hits = 0
    for _ in range(n_windows):
        cells = rng.integers(0, maze.n_cells, size=MIN_SEQUENCE_LENGTH)
        picks = rng.integers(0, len(memories), size=MIN_SEQUENCE_LENGTH)
        window = [
            ReplayEventJS(
                stop=0,
                replay_index=k,
                task=TaskId.ALTERNATION,
                phase=Phase.RECORDING,
                state=[0.0] * maze.n_cells + list(memories[int(m)]),
                decoded_cell=int(c),
                priority=0.0,
                agent_cell=maze.start_cell,
                updates_performed=0,
            )
            for k, (c, m) in enumerate(zip(cells, picks))
        ]
        if detector.detect_stop(window):
            hits += 1
    return hits / n_windows if n_windows else 0.0
