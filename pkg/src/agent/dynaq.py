from __future__ import annotations
import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable, Hashable, Protocol
import numpy as np
import pandas as pd

from src.core.enums import ACTIONS, Action, NetKind, Phase, Side, SweepActions, TaskId
from src.core.exceptions import MazeError
from src.core.logger import logger
from src.core.models import AgentConfig, EncodingConfig, NetBundle, ReplayEventJS, TrialJS
from src.maze.env import (
    Maze,
    RewardMemory,
    StateVector,
    blocked_cells_for,
    decode_memory,
    decode_position,
    encode_state,
    rewarded_sides,
    step,
    update_memory,
    valid_actions,
    with_blocking,
)
from src.nn.net import LayeredNet, new_net


class PredecessorModel(Protocol):
    def predict_predecessors(
        self,
        state: StateVector,
        action: Action,
        gate_threshold: float = 0.5,
        epsilon: float = 0.5,
    ) -> list[StateVector]: ...

    def predict_reward(
        self, state: StateVector, action: Action, gate_threshold: float = 0.5
    ) -> float: ...


class QBank:
    """One Q network per action."""

    def __init__(self, nets: dict[Action, LayeredNet]):
        missing = [a for a in ACTIONS if a not in nets]
        if missing:
            raise ValueError(f"QBank is missing networks for actions {missing}.")
        self.nets = nets

    @classmethod
    def create(
        cls,
        input_dim: int,
        rng: np.random.Generator,
        bundles: dict[NetKind, NetBundle] | None = None,
    ) -> QBank:
        return cls({a: new_net(NetKind.Q, input_dim, 1, rng, bundles) for a in ACTIONS})

    def value(self, state: StateVector, action: Action) -> float:
        return float(self.nets[action].forward(state)[0])

    def values(self, state: StateVector, actions: tuple[Action, ...] = ACTIONS) -> np.ndarray:
        return np.array([self.value(state, a) for a in actions])

    def max_value(self, state: StateVector, actions: tuple[Action, ...] = ACTIONS) -> float:
        if not actions:
            return 0.0
        return float(self.values(state, actions).max())

    def greedy(self, state: StateVector, actions: tuple[Action, ...] = ACTIONS) -> Action:
        return actions[int(np.argmax(self.values(state, actions)))]


QueueKey = Callable[[StateVector], Hashable]


def memory_cell_key(state: StateVector) -> Hashable:
    return (decode_position(state), decode_memory(state))


class PrioritizedQueue:
    """Max-priority queue of states; equal priorities pop in insertion order.

    With a key function, pushes of states sharing a key coalesce: only the
    highest priority pending entry for that key survives."""

    def __init__(self, key: QueueKey | None = None):
        self._heap: list[tuple[float, int, StateVector, Hashable]] = []
        self._counter = itertools.count()
        self._key = key
        # key -> (priority, counter) of the live entry
        self._live: dict[Hashable, tuple[float, int]] = {}

    def __len__(self) -> int:
        if self._key is None:
            return len(self._heap)
        return len(self._live)

    def __bool__(self) -> bool:
        return len(self) > 0

    def push(self, state: StateVector, priority: float) -> None:
        if priority < 0:
            raise ValueError(f"Priority must be non-negative, got {priority}.")
        count = next(self._counter)
        key: Hashable = None
        if self._key is not None:
            key = self._key(state)
            live = self._live.get(key)
            if live is not None and live[0] >= priority:
                return
            self._live[key] = (priority, count)
        heapq.heappush(self._heap, (-priority, count, np.array(state, dtype=np.float64), key))

    def pop(self) -> tuple[StateVector, float]:
        while self._heap:
            neg_priority, count, state, key = heapq.heappop(self._heap)
            if self._key is not None:
                if self._live.get(key, (None, None))[1] != count:
                    continue  # superseded
                del self._live[key]
            return state, -neg_priority
        raise IndexError("pop from an empty PrioritizedQueue")


@dataclass
class ReplayEvent:
    stop: int
    replay_index: int
    task: TaskId
    phase: Phase
    state: StateVector
    decoded_cell: int | None
    priority: float
    agent_cell: int
    updates_performed: int

    def to_record(self) -> ReplayEventJS:
        return ReplayEventJS(
            stop=self.stop,
            replay_index=self.replay_index,
            task=self.task,
            phase=self.phase,
            state=[float(v) for v in self.state],
            decoded_cell=self.decoded_cell,
            priority=self.priority,
            agent_cell=self.agent_cell,
            updates_performed=self.updates_performed,
        )


def softmax_probabilities(values: np.ndarray, beta: float) -> np.ndarray:
    prefs = beta * np.asarray(values, dtype=np.float64)
    prefs -= prefs.max()
    weights = np.exp(prefs)
    return weights / weights.sum()


def select_action(
    q: QBank,
    state: StateVector,
    valid: tuple[Action, ...],
    beta: float,
    rng: np.random.Generator,
) -> Action:
    if not valid:
        raise ValueError("select_action needs at least one valid action.")
    probs = softmax_probabilities(q.values(state, valid), beta)
    return valid[int(rng.choice(len(valid), p=probs))]


def online_update(
    q: QBank,
    state: StateVector,
    action: Action,
    reward: float,
    next_state: StateVector,
    valid_next: tuple[Action, ...],
    gamma: float,
) -> float:
    """One backprop step on Q_action toward r + γ·max Q(next); returns the
    pre-update absolute error, used as replay priority."""
    target = reward + gamma * q.max_value(next_state, valid_next)
    priority = abs(q.value(state, action) - target)
    q.nets[action].backprop(state, target)
    return priority


def replay_sweep(
    q: QBank,
    model: PredecessorModel,
    queue: PrioritizedQueue,
    config: AgentConfig,
    *,
    stop: int = 0,
    agent_cell: int = 0,
    task: TaskId = TaskId.ALTERNATION,
    phase: Phase = Phase.PRETRAINING,
    snap: Callable[[StateVector], StateVector] | None = None,
) -> list[ReplayEvent]:
    budget = config.replay_budget
    events: list[ReplayEvent] = []
    n_updates = 0
    while queue and n_updates < budget:
        popped, priority = queue.pop()
        predecessors: list[tuple[StateVector, Action]] = []
        for k in ACTIONS:
            for p in model.predict_predecessors(popped, k, config.gate_threshold, config.null_epsilon):
                predecessors.append((snap(p) if snap is not None else p, k))
        bootstrap = config.gamma * q.max_value(popped)
        updates = 0
        for p, k in predecessors:
            actions = ACTIONS if config.sweep_actions == SweepActions.ALL else (k,)
            for a in actions:
                if n_updates >= budget:
                    break
                target = model.predict_reward(p, a, config.gate_threshold) + bootstrap
                p_priority = abs(q.value(p, a) - target)
                q.nets[a].backprop(p, target)
                queue.push(p, p_priority)
                n_updates += 1
                updates += 1
            if n_updates >= budget:
                break
        events.append(
            ReplayEvent(
                stop=stop,
                replay_index=len(events),
                task=task,
                phase=phase,
                state=popped,
                decoded_cell=decode_position(popped),
                priority=priority,
                agent_cell=agent_cell,
                updates_performed=updates,
            )
        )
    return events


@dataclass(frozen=True)
class ScheduleEntry:
    task: TaskId
    trials: int
    phase: Phase = Phase.PRETRAINING


@dataclass
class StepRecord:
    step: int
    trial: int
    task: TaskId
    cell: int
    action: Action
    reward: float
    priority: float


@dataclass
class RunLog:
    trials: list[TrialJS] = field(default_factory=list)
    steps: list[StepRecord] = field(default_factory=list)
    replay_events: list[ReplayEventJS] = field(default_factory=list)

    def steps_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "step": s.step,
                    "trial": s.trial,
                    "task": int(s.task),
                    "cell": s.cell,
                    "action": str(s.action),
                    "reward": s.reward,
                    "priority": s.priority,
                }
                for s in self.steps
            ],
            columns=["step", "trial", "task", "cell", "action", "reward", "priority"],
        )

    def error_rates(self) -> np.ndarray:
        return np.array([0.0 if t.correct else 1.0 for t in self.trials])


def legal_states(maze: Maze, encoding: EncodingConfig = EncodingConfig()) -> np.ndarray:
    """Every encodable (open cell, reachable memory) state, one per row."""
    memories = [RewardMemory()] + [
        RewardMemory(last=last, penultimate=pen)
        for last in (Side.LEFT, Side.RIGHT)
        for pen in (Side.NONE, Side.LEFT, Side.RIGHT)
    ]
    rows = [
        encode_state(maze, cell, memory, encoding)
        for cell in range(maze.n_cells)
        if maze.is_open(cell)
        for memory in memories
    ]
    return np.vstack(rows)


def nearest_state_snapper(candidates: np.ndarray) -> Callable[[StateVector], StateVector]:
    def snap(state: StateVector) -> StateVector:
        distances = np.abs(candidates - state).sum(axis=1)
        return candidates[int(np.argmin(distances))].copy()

    return snap


def task_mazes(
    maze: Maze,
    tasks: list[TaskId],
    left_block: str = "",
    right_block: str = "",
) -> dict[TaskId, Maze]:
    return {
        task: with_blocking(maze, blocked_cells_for(maze, task, left_block, right_block))
        for task in dict.fromkeys(tasks)
    }


def run_experiment(
    maze: Maze,
    schedule: list[ScheduleEntry],
    config: AgentConfig,
    q: QBank,
    rng: np.random.Generator,
    model: PredecessorModel | None = None,
    *,
    with_replays: bool = True,
    encoding: EncodingConfig = EncodingConfig(),
    mazes: dict[TaskId, Maze] | None = None,
    log_prefix: str = "",
) -> RunLog:
    """Runs laps over the schedule. A trial ends when the agent reaches
    either reward site (or gives up after max_lap_steps); rewarded arrivals
    trigger a replay sweep when replays are enabled."""
    if with_replays and model is None and config.replay_budget > 0:
        raise ValueError("Replays need a world model.")
    replaying = with_replays and model is not None and config.replay_budget > 0
    if mazes is None:
        mazes = task_mazes(maze, [entry.task for entry in schedule])
    queue = PrioritizedQueue(memory_cell_key if config.coalesce_queue else None)
    log = RunLog()
    memory = RewardMemory()
    cell, prev = maze.start_cell, None
    trial, global_step, stop = 0, 0, 0
    snappers: dict[TaskId, Callable[[StateVector], StateVector]] = {}

    logger.info(
        f"{log_prefix}Starting run: {sum(e.trials for e in schedule)} trials, "
        f"replay budget {config.replay_budget if replaying else 0}."
    )
    for entry in schedule:
        task_maze = mazes[entry.task]
        if not task_maze.is_open(cell) or (prev is not None and not task_maze.is_open(prev)):
            logger.debug(f"{log_prefix}Cell {cell} closed under task {entry.task}, back to start.")
            cell, prev = task_maze.start_cell, None
        snap = None
        if config.snap_replays:
            if entry.task not in snappers:
                snappers[entry.task] = nearest_state_snapper(legal_states(task_maze, encoding))
            snap = snappers[entry.task]

        for _ in range(entry.trials):
            beta = config.beta_at(trial)
            state = encode_state(task_maze, cell, memory, encoding)
            choice = Side.NONE
            correct = False
            lap_steps = 0
            while lap_steps < config.max_lap_steps:
                valid = valid_actions(task_maze, cell, prev)
                if not valid:
                    raise MazeError(f"{log_prefix}No lap move from cell {cell} (previous {prev}).")
                action = select_action(q, state, valid, beta, rng)
                next_cell, reward, _ = step(
                    task_maze, entry.task, cell, prev, action, memory, config.reward_magnitude
                )
                site_side = task_maze.side_of_site(next_cell)
                if site_side != Side.NONE:
                    choice = site_side
                    correct = site_side in rewarded_sides(entry.task, memory)
                memory = update_memory(memory, site_side if reward > 0 else Side.NONE)
                next_state = encode_state(task_maze, next_cell, memory, encoding)
                priority = online_update(
                    q,
                    state,
                    action,
                    reward,
                    next_state,
                    valid_actions(task_maze, next_cell, cell),
                    config.gamma,
                )
                if replaying:
                    queue.push(state, priority)
                log.steps.append(
                    StepRecord(global_step, trial, entry.task, cell, action, reward, priority)
                )
                prev, cell, state = cell, next_cell, next_state
                global_step += 1
                lap_steps += 1

                if reward > 0 and replaying:
                    assert model is not None
                    events = replay_sweep(
                        q,
                        model,
                        queue,
                        config,
                        stop=stop,
                        agent_cell=cell,
                        task=entry.task,
                        phase=entry.phase,
                        snap=snap,
                    )
                    log.replay_events.extend(event.to_record() for event in events)
                    logger.debug(f"{log_prefix}Stop {stop}: {len(events)} replay events.")
                    stop += 1
                if site_side != Side.NONE:
                    break
            else:
                logger.warning(
                    f"{log_prefix}Trial {trial} hit the {config.max_lap_steps}-step limit "
                    "without reaching a reward site."
                )
            log.trials.append(
                TrialJS(
                    trial=trial,
                    task=entry.task,
                    phase=entry.phase,
                    choice=choice,
                    correct=correct,
                    steps=lap_steps,
                )
            )
            trial += 1

    errors = log.error_rates()
    logger.info(
        f"{log_prefix}Run finished: {trial} trials, {global_step} steps, "
        f"{len(log.replay_events)} replay events, "
        f"error rate {errors.mean() if len(errors) else 0.0:.3f}."
    )
    return log
