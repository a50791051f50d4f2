from __future__ import annotations
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np

from src.agent.dynaq import QBank, select_action
from src.core.enums import ACTIONS, Action, DatasetMode, NetKind, RewardInput, Side, TaskId
from src.core.exceptions import DimensionError, MazeError
from src.core.logger import logger
from src.core.models import (
    AgentConfig,
    EncodingConfig,
    EnsembleJS,
    GalmoConfig,
    NetBundle,
    TransitionSampleJS,
)
from src.maze.env import (
    STATE_DIM,
    Maze,
    RewardMemory,
    StateVector,
    decode_memory,
    decode_position,
    encode_state,
    state_key,
    step,
    update_memory,
    valid_actions,
)
from src.nn.galmo import ExpertEnsemble, SampleSet, TrainingReport, train

# (cell, (L, R)) as read back from a state vector
DecodedState = tuple[int | None, tuple[float, float]]


@dataclass(frozen=True, eq=False)
class TransitionSample:
    succ: StateVector
    pred: StateVector
    action: Action
    reward: float
    task: TaskId

    @property
    def is_null(self) -> bool:
        return not np.any(self.pred)

    def key(self) -> tuple[bytes, bytes, Action, float]:
        return (state_key(self.succ), state_key(self.pred), self.action, self.reward)

    def to_record(self) -> TransitionSampleJS:
        return TransitionSampleJS(
            succ=self.succ.tolist(),
            pred=self.pred.tolist(),
            action=self.action,
            reward=self.reward,
            task=self.task,
        )

    @classmethod
    def from_record(cls, record: TransitionSampleJS) -> TransitionSample:
        return cls(
            succ=np.asarray(record.succ, dtype=np.float64),
            pred=np.asarray(record.pred, dtype=np.float64),
            action=record.action,
            reward=record.reward,
            task=record.task,
        )


def decode_state(state: StateVector) -> DecodedState:
    return (decode_position(state), decode_memory(state))


def task_histories(task: TaskId) -> list[RewardMemory]:
    """Reward histories a contingency keeps returning to once it is being
    solved: (R,R) or (L,L) for the fixed-side tasks, the two alternating
    histories for alternation."""
    if task in (TaskId.RIGHT_LEFT_BLOCKED, TaskId.RIGHT):
        return [RewardMemory(last=Side.RIGHT, penultimate=Side.RIGHT)]
    if task in (TaskId.LEFT_RIGHT_BLOCKED, TaskId.LEFT):
        return [RewardMemory(last=Side.LEFT, penultimate=Side.LEFT)]
    return [
        RewardMemory(last=Side.LEFT, penultimate=Side.RIGHT),
        RewardMemory(last=Side.RIGHT, penultimate=Side.LEFT),
    ]


def _exhaustive_samples(
    maze: Maze,
    task: TaskId,
    encoding: EncodingConfig,
    reward_magnitude: float,
) -> tuple[list[TransitionSample], dict[bytes, tuple[StateVector, TaskId]]]:
    """Breadth-first walk over (cell, previous cell, memory) from the start
    cell under the task's own reward histories."""
    samples: list[TransitionSample] = []
    states: dict[bytes, tuple[StateVector, TaskId]] = {}
    frontier: deque[tuple[int, int | None, RewardMemory]] = deque(
        (maze.start_cell, None, memory) for memory in task_histories(task)
    )
    seen = set(frontier)
    while frontier:
        cell, prev, memory = frontier.popleft()
        pred = encode_state(maze, cell, memory, encoding)
        states.setdefault(state_key(pred), (pred, task))
        for action in valid_actions(maze, cell, prev):
            next_cell, reward, side = step(maze, task, cell, prev, action, memory, reward_magnitude)
            next_memory = update_memory(memory, side)
            succ = encode_state(maze, next_cell, next_memory, encoding)
            states.setdefault(state_key(succ), (succ, task))
            samples.append(TransitionSample(succ, pred, action, reward, task))
            extended = (next_cell, cell, next_memory)
            if extended not in seen:
                seen.add(extended)
                frontier.append(extended)
    return samples, states


def _behavioral_samples(
    maze: Maze,
    task: TaskId,
    memory: RewardMemory,
    position: tuple[int, int | None],
    encoding: EncodingConfig,
    agent: AgentConfig,
    q: QBank,
    rng: np.random.Generator,
    n_laps: int,
) -> tuple[list[TransitionSample], RewardMemory, tuple[int, int | None]]:
    """Softmax-driven laps in the order they were run."""
    samples: list[TransitionSample] = []
    cell, prev = position
    if not maze.is_open(cell) or (prev is not None and not maze.is_open(prev)):
        cell, prev = maze.start_cell, None
    for _ in range(n_laps):
        for _ in range(agent.max_lap_steps):
            valid = valid_actions(maze, cell, prev)
            if not valid:
                raise MazeError(f"No lap move from cell {cell} (previous {prev}).")
            state = encode_state(maze, cell, memory, encoding)
            action = select_action(q, state, valid, agent.beta, rng)
            next_cell, reward, side = step(
                maze, task, cell, prev, action, memory, agent.reward_magnitude
            )
            memory = update_memory(memory, side)
            succ = encode_state(maze, next_cell, memory, encoding)
            samples.append(TransitionSample(succ, state, action, reward, task))
            prev, cell = cell, next_cell
            if maze.side_of_site(cell) != Side.NONE:
                break
    return samples, memory, (cell, prev)


def collect_dataset(
    mazes: dict[TaskId, Maze],
    tasks: list[TaskId],
    mode: DatasetMode = DatasetMode.EXHAUSTIVE,
    *,
    encoding: EncodingConfig = EncodingConfig(),
    agent: AgentConfig = AgentConfig(),
    rng: np.random.Generator | None = None,
    q: QBank | None = None,
    n_laps: int = 50,
    dedup: bool = True,
    log_prefix: str = "",
) -> list[TransitionSample]:
    """Transition quadruplets (succ, pred, action, reward) for the given
    tasks, plus null samples for every visited (state, action) that has no
    predecessor. `mazes` holds the (blocked) maze of each task."""
    if not tasks:
        raise ValueError("collect_dataset needs at least one task.")
    logger.info(f"{log_prefix}Collecting {mode} dataset for tasks {[int(t) for t in tasks]}...")
    samples: list[TransitionSample] = []
    states: dict[bytes, tuple[StateVector, TaskId]] = {}
    if mode == DatasetMode.EXHAUSTIVE:
        for task in tasks:
            task_samples, task_states = _exhaustive_samples(
                mazes[task], task, encoding, agent.reward_magnitude
            )
            samples.extend(task_samples)
            for key, value in task_states.items():
                states.setdefault(key, value)
    else:
        if rng is None or q is None:
            raise ValueError("Behavioral collection needs a generator and a Q bank.")
        memory = RewardMemory()
        position: tuple[int, int | None] = (mazes[tasks[0]].start_cell, None)
        for task in tasks:
            task_samples, memory, position = _behavioral_samples(
                mazes[task], task, memory, position, encoding, agent, q, rng, n_laps
            )
            samples.extend(task_samples)
            for sample in task_samples:
                states.setdefault(state_key(sample.succ), (sample.succ, task))
                states.setdefault(state_key(sample.pred), (sample.pred, task))

    entered = {(state_key(s.succ), s.action) for s in samples}
    null = np.zeros(STATE_DIM)
    n_null = 0
    for key, (state, task) in states.items():
        for action in ACTIONS:
            if (key, action) not in entered:
                samples.append(TransitionSample(state, null, action, 0.0, task))
                n_null += 1

    if dedup:
        unique: dict[tuple[bytes, bytes, Action, float], TransitionSample] = {}
        for sample in samples:
            unique.setdefault(sample.key(), sample)
        samples = list(unique.values())
    logger.info(
        f"{log_prefix}Collected {len(samples)} samples over {len(states)} states "
        f"({n_null} null transitions)."
    )
    return samples


def true_predecessors(
    samples: list[TransitionSample],
) -> dict[tuple[bytes, Action], set[DecodedState]]:
    """Ground truth: (succ key, action) -> decoded predecessor set, empty for
    null-only pairs."""
    truth: dict[tuple[bytes, Action], set[DecodedState]] = {}
    for sample in samples:
        entry = truth.setdefault((state_key(sample.succ), sample.action), set())
        if not sample.is_null:
            entry.add(decode_state(sample.pred))
    return truth


def multi_predecessor_states(samples: list[TransitionSample]) -> list[tuple[bytes, Action]]:
    return [key for key, preds in true_predecessors(samples).items() if len(preds) > 1]


class WorldModel:
    """Per-action predecessor and reward ensembles."""

    def __init__(
        self,
        predecessors: dict[Action, ExpertEnsemble],
        rewards: dict[Action, ExpertEnsemble],
        reward_input: RewardInput = RewardInput.ARRIVAL,
        w: float = 3.0,
    ):
        for name, ensembles, out_dim in (("predecessor", predecessors, STATE_DIM), ("reward", rewards, 1)):
            for action in ACTIONS:
                if action not in ensembles:
                    raise ValueError(f"World model has no {name} ensemble for action {action}.")
                if ensembles[action].output_dim != out_dim:
                    raise DimensionError(
                        f"{name} ensemble for {action} outputs {ensembles[action].output_dim} "
                        f"values, expected {out_dim}."
                    )
        self.predecessors = predecessors
        self.rewards = rewards
        self.reward_input = reward_input
        self.w = w
        self.reports: dict[tuple[NetKind, Action], TrainingReport] = {}

    @classmethod
    def create(
        cls,
        rng: np.random.Generator,
        bundles: dict[NetKind, NetBundle] | None = None,
        reward_input: RewardInput = RewardInput.ARRIVAL,
        w: float = 3.0,
    ) -> WorldModel:
        predecessors = {
            a: ExpertEnsemble.create(NetKind.P, STATE_DIM, STATE_DIM, rng, bundles) for a in ACTIONS
        }
        rewards = {a: ExpertEnsemble.create(NetKind.R, STATE_DIM, 1, rng, bundles) for a in ACTIONS}
        return cls(predecessors, rewards, reward_input, w)

    def predict_predecessors(
        self,
        state: StateVector,
        action: Action,
        gate_threshold: float = 0.5,
        epsilon: float = 0.5,
    ) -> list[StateVector]:
        return [
            out
            for out, _ in self.predecessors[action].predict_all(state, gate_threshold)
            if float(np.abs(out).sum()) > epsilon
        ]

    def predict_reward(self, state: StateVector, action: Action, gate_threshold: float = 0.5) -> float:
        """Output of the expert with the strongest gate."""
        ensemble = self.rewards[action]
        gates = ensemble.gate_values(state)
        best = int(np.argmax(gates))
        if gates[best] <= gate_threshold:
            logger.debug(f"No reward gate fires for action {action}, using the strongest one.")
        return float(ensemble.experts[best].forward(state)[0])

    def expert_counts(self) -> dict[str, int]:
        counts = {f"pred_{a}": len(self.predecessors[a]) for a in ACTIONS}
        counts.update({f"reward_{a}": len(self.rewards[a]) for a in ACTIONS})
        return counts

    def save(self, directory: Path) -> None:
        directory.mkdir(parents=True, exist_ok=True)
        for prefix, ensembles in (("pred", self.predecessors), ("reward", self.rewards)):
            for action, ensemble in ensembles.items():
                (directory / f"{prefix}_{action}.json").write_text(
                    ensemble.to_record(self.w).model_dump_json(), encoding="utf-8"
                )
        (directory / "reward_input.txt").write_text(str(self.reward_input), encoding="utf-8")
        logger.info(f"Saved world model to '{directory}'.")

    @classmethod
    def load(cls, directory: Path) -> WorldModel:
        def read(prefix: str, action: Action) -> ExpertEnsemble:
            path = directory / f"{prefix}_{action}.json"
            return ExpertEnsemble.from_record(
                EnsembleJS.model_validate_json(path.read_text(encoding="utf-8"))
            )

        reward_input_file = directory / "reward_input.txt"
        reward_input = (
            RewardInput(reward_input_file.read_text(encoding="utf-8").strip())
            if reward_input_file.is_file()
            else RewardInput.ARRIVAL
        )
        model = cls(
            {a: read("pred", a) for a in ACTIONS},
            {a: read("reward", a) for a in ACTIONS},
            reward_input,
        )
        logger.info(f"Loaded world model from '{directory}': {model.expert_counts()}.")
        return model


def predecessor_pairs(samples: list[TransitionSample], action: Action) -> SampleSet:
    return [(s.succ, s.pred) for s in samples if s.action == action]


def _reward_input(sample: TransitionSample, reward_input: RewardInput) -> StateVector | None:
    if reward_input == RewardInput.ARRIVAL:
        return sample.succ
    if sample.is_null:
        return None
    return sample.pred


def reward_targets(
    samples: list[TransitionSample], action: Action, reward_input: RewardInput
) -> dict[bytes, tuple[StateVector, float]]:
    """One target per reward-net input. An arrival state reached both with
    and without a reward (a site entered under two memories that end up
    equal) keeps the rewarded outcome."""
    targets: dict[bytes, tuple[StateVector, float]] = {}
    for s in samples:
        if s.action != action:
            continue
        x = _reward_input(s, reward_input)
        if x is None:
            continue
        key = state_key(x)
        if key not in targets or s.reward > targets[key][1]:
            targets[key] = (x, s.reward)
    return targets


def reward_pairs(
    samples: list[TransitionSample], action: Action, reward_input: RewardInput
) -> SampleSet:
    return [
        (x, np.array([target]))
        for x, target in reward_targets(samples, action, reward_input).values()
    ]


def learn(
    samples: list[TransitionSample],
    config: GalmoConfig,
    rng: np.random.Generator,
    bundles: dict[NetKind, NetBundle] | None = None,
    reward_input: RewardInput = RewardInput.ARRIVAL,
    kinds: tuple[NetKind, ...] = (NetKind.P, NetKind.R),
    log_prefix: str = "",
) -> WorldModel:
    """Trains the per-action ensembles with GALMO. Ensembles of kinds not
    listed stay untrained."""
    if not samples:
        raise ValueError("learn needs a non-empty dataset.")
    model = WorldModel.create(rng, bundles, reward_input, config.w)
    for action in ACTIONS:
        if NetKind.P in kinds:
            pairs = predecessor_pairs(samples, action)
            logger.info(f"{log_prefix}Training predecessor model {action} on {len(pairs)} pairs...")
            report = TrainingReport()
            train(model.predecessors[action], pairs, config, rng, report, f"{log_prefix}[P {action}] ")
            model.reports[(NetKind.P, action)] = report
        if NetKind.R in kinds:
            pairs = reward_pairs(samples, action, reward_input)
            logger.info(f"{log_prefix}Training reward model {action} on {len(pairs)} pairs...")
            report = TrainingReport()
            train(model.rewards[action], pairs, config, rng, report, f"{log_prefix}[R {action}] ")
            model.reports[(NetKind.R, action)] = report
    logger.info(f"{log_prefix}Successfully trained world model: {model.expert_counts()}.")
    return model


@dataclass
class CoverageReport:
    pairs: int = 0
    hits: int = 0
    mismatches: list[tuple[bytes, Action, set[DecodedState], set[DecodedState]]] = field(
        default_factory=list
    )
    multi_predecessor: list[tuple[bytes, Action, bool]] = field(default_factory=list)

    @property
    def hit_rate(self) -> float:
        return self.hits / self.pairs if self.pairs else 1.0

    @property
    def multi_predecessor_hits(self) -> int:
        return sum(1 for _, _, ok in self.multi_predecessor if ok)


def coverage_report(
    model: WorldModel,
    samples: list[TransitionSample],
    gate_threshold: float = 0.5,
    epsilon: float = 0.5,
) -> CoverageReport:
    """Compares decoded predicted predecessor sets with the dataset's truth."""
    succ_by_key = {state_key(s.succ): s.succ for s in samples}
    report = CoverageReport()
    for (key, action), truth in true_predecessors(samples).items():
        predicted = {
            decode_state(p)
            for p in model.predict_predecessors(succ_by_key[key], action, gate_threshold, epsilon)
        }
        ok = predicted == truth
        report.pairs += 1
        report.hits += ok
        if not ok:
            report.mismatches.append((key, action, truth, predicted))
        if len(truth) > 1:
            report.multi_predecessor.append((key, action, ok))
    return report


@dataclass(frozen=True)
class RewardErrors:
    max_error: float
    mean_error: float
    # each input scored by the expert closest to its target instead of the
    # strongest gate
    best_expert_max_error: float


def reward_errors(
    model: WorldModel, samples: list[TransitionSample]
) -> dict[TaskId, RewardErrors]:
    """Per task absolute error of predict_reward, the value replays use,
    against the reward target of every input."""
    targets = {a: reward_targets(samples, a, model.reward_input) for a in ACTIONS}
    gated: dict[TaskId, list[float]] = {}
    closest: dict[TaskId, list[float]] = {}
    for s in samples:
        x = _reward_input(s, model.reward_input)
        if x is None:
            continue
        target = targets[s.action][state_key(x)][1]
        ensemble = model.rewards[s.action]
        gated.setdefault(s.task, []).append(abs(model.predict_reward(x, s.action) - target))
        closest.setdefault(s.task, []).append(
            min(abs(float(expert.forward(x)[0]) - target) for expert in ensemble.experts)
        )
    return {
        task: RewardErrors(max(errors), float(np.mean(errors)), max(closest[task]))
        for task, errors in sorted(gated.items())
    }


def save_dataset(samples: list[TransitionSample], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for sample in samples:
            f.write(sample.to_record().model_dump_json() + "\n")


def load_dataset(path: Path) -> list[TransitionSample]:
    with path.open(encoding="utf-8") as f:
        return [
            TransitionSample.from_record(TransitionSampleJS.model_validate_json(line))
            for line in f
            if line.strip()
        ]


def matched_epochs(reference_size: int, reference_epochs: int, stream_size: int) -> int:
    """Epochs over a stream of stream_size samples that present as many
    samples as reference_epochs over reference_size."""
    if stream_size <= 0:
        raise ValueError("matched_epochs needs a non-empty stream.")
    if reference_epochs == 0:
        return 0
    return max(1, round(reference_size * reference_epochs / stream_size))
