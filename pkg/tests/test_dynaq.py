import numpy as np
import pytest

from src.agent.dynaq import (
    PrioritizedQueue,
    QBank,
    ScheduleEntry,
    legal_states,
    memory_cell_key,
    nearest_state_snapper,
    online_update,
    replay_sweep,
    run_experiment,
    select_action,
    softmax_probabilities,
)
from src.analysis.compare import mean_curve, trials_to_threshold
from src.core.enums import ACTIONS, Action, Phase, Side, SweepActions, TaskId
from src.core.models import AgentConfig
from src.maze.env import STATE_DIM, RewardMemory, encode_state, valid_actions
from tests.conftest import LEFT_SITE, RIGHT_SITE, START, T1, T2

CHAIN = 4


def _one_hot(i: int, n: int = CHAIN) -> np.ndarray:
    x = np.zeros(n)
    x[i] = 1.0
    return x


class ChainModel:
    """Tabular model of a corridor 0 -> 1 -> 2 -> 3 walked eastward; the
    step from 2 to 3 pays 0.8."""

    def predict_predecessors(self, state, action, gate_threshold=0.5, epsilon=0.5):
        i = int(np.argmax(state))
        if action != Action.E or i == 0:
            return []
        return [_one_hot(i - 1)]

    def predict_reward(self, state, action, gate_threshold=0.5):
        return 0.8 if action == Action.E and int(np.argmax(state)) == 2 else 0.0


class FanModel:
    """Every state has two predecessors under every action."""

    def predict_predecessors(self, state, action, gate_threshold=0.5, epsilon=0.5):
        return [np.full(STATE_DIM, 0.1), np.full(STATE_DIM, 0.2)]

    def predict_reward(self, state, action, gate_threshold=0.5):
        return 0.0


class SilentModel:
    def predict_predecessors(self, state, action, gate_threshold=0.5, epsilon=0.5):
        return []

    def predict_reward(self, state, action, gate_threshold=0.5):
        return 0.0


def test_softmax_probabilities():
    np.testing.assert_allclose(softmax_probabilities(np.zeros(4), 20.0), [0.25] * 4)
    assert softmax_probabilities(np.array([0.1, 0.0]), 20.0)[0] == pytest.approx(0.8808, abs=1e-4)
    # large preferences stay finite
    assert np.isfinite(softmax_probabilities(np.array([100.0, 0.0]), 50.0)).all()


def test_select_action_only_returns_valid(maze, rng):
    q = QBank.create(STATE_DIM, rng)
    state = encode_state(maze, START, RewardMemory())
    valid = valid_actions(maze, START, None)
    assert {select_action(q, state, valid, 20.0, rng) for _ in range(50)} <= set(valid)
    with pytest.raises(ValueError):
        select_action(q, state, (), 20.0, rng)


def test_queue_pops_highest_priority_then_fifo():
    queue = PrioritizedQueue()
    for i, priority in enumerate([0.1, 0.5, 0.5, 0.3]):
        queue.push(_one_hot(i), priority)
    order = [int(np.argmax(queue.pop()[0])) for _ in range(4)]
    assert order == [1, 2, 3, 0]
    assert not queue
    with pytest.raises(IndexError):
        queue.pop()
    with pytest.raises(ValueError):
        queue.push(_one_hot(0), -0.1)


def test_queue_keeps_duplicates_without_a_key():
    queue = PrioritizedQueue()
    queue.push(_one_hot(0), 0.2)
    queue.push(_one_hot(0), 0.4)
    assert len(queue) == 2


def test_coalescing_queue_keeps_highest_priority(maze):
    queue = PrioritizedQueue(memory_cell_key)
    state = encode_state(maze, START, RewardMemory())
    other = encode_state(maze, START, RewardMemory(last=Side.LEFT))
    queue.push(state, 0.2)
    queue.push(state, 0.4)
    queue.push(state, 0.1)
    queue.push(other, 0.3)
    assert len(queue) == 2
    assert queue.pop()[1] == 0.4
    assert queue.pop()[1] == 0.3
    assert not queue


def test_online_update_priority_is_pre_update_error(rng):
    q = QBank.create(CHAIN, rng)
    s, s_next = _one_hot(0), _one_hot(1)
    before = q.value(s, Action.E)
    target = 0.8 + 0.9 * max(q.value(s_next, a) for a in (Action.E, Action.N))
    priority = online_update(q, s, Action.E, 0.8, s_next, (Action.E, Action.N), 0.9)
    assert priority == pytest.approx(abs(before - target))
    assert abs(q.value(s, Action.E) - target) < abs(before - target)


def test_terminal_next_state_bootstraps_zero(rng):
    q = QBank.create(CHAIN, rng)
    s = _one_hot(0)
    before = q.value(s, Action.W)
    assert online_update(q, s, Action.W, 0.0, _one_hot(1), (), 0.9) == pytest.approx(before)


def test_zero_budget_leaves_queue_untouched(rng):
    q = QBank.create(STATE_DIM, rng)
    queue = PrioritizedQueue()
    queue.push(np.full(STATE_DIM, 0.3), 1.0)
    events = replay_sweep(q, FanModel(), queue, AgentConfig(replay_budget=0))
    assert events == []
    assert len(queue) == 1


def test_budget_caps_updates(rng):
    q = QBank.create(STATE_DIM, rng)
    queue = PrioritizedQueue()
    queue.push(np.full(STATE_DIM, 0.3), 1.0)
    events = replay_sweep(q, FanModel(), queue, AgentConfig(replay_budget=5))
    assert sum(e.updates_performed for e in events) == 5
    assert len(events) == 1
    assert events[0].priority == 1.0


def test_predecessor_priority_by_hand(rng):
    q = QBank.create(CHAIN, rng)
    config = AgentConfig(replay_budget=1, sweep_actions=SweepActions.LINKING, gamma=0.9)
    goal, pred = _one_hot(3), _one_hot(2)
    expected = abs(q.value(pred, Action.E) - (0.8 + 0.9 * q.max_value(goal)))
    queue = PrioritizedQueue()
    queue.push(goal, 1.0)
    replay_sweep(q, ChainModel(), queue, config)
    state, priority = queue.pop()
    np.testing.assert_array_equal(state, pred)
    assert priority == pytest.approx(expected)


def test_chain_sweeps_propagate_value_backward(rng):
    q = QBank.create(CHAIN, rng)
    for _ in range(500):
        for i in range(CHAIN):
            for a in ACTIONS:
                q.nets[a].backprop(_one_hot(i), 0.0)
    config = AgentConfig(replay_budget=20, sweep_actions=SweepActions.LINKING)
    model = ChainModel()

    queue = PrioritizedQueue()
    queue.push(_one_hot(3), 1.0)
    events = replay_sweep(q, model, queue, config, phase=Phase.RECORDING)
    assert [e.decoded_cell for e in events] == [3, 2, 1, 0]
    assert [e.replay_index for e in events] == [0, 1, 2, 3]
    assert [e.updates_performed for e in events] == [1, 1, 1, 0]

    for _ in range(1000):
        queue.push(_one_hot(3), 1.0)
        replay_sweep(q, model, queue, config)
    for i in range(CHAIN - 1):
        assert q.greedy(_one_hot(i)) == Action.E
    values = [q.value(_one_hot(i), Action.E) for i in range(CHAIN - 1)]
    assert values[0] < values[1] < values[2]
    assert values[2] > 0.7


def test_snapper_returns_a_legal_state(maze):
    candidates = legal_states(maze)
    snap = nearest_state_snapper(candidates)
    legal = encode_state(maze, START, RewardMemory(last=Side.RIGHT))
    noisy = legal + 0.01
    np.testing.assert_array_equal(snap(noisy), legal)


def _run(maze, mazes, seed, config, model=None, with_replays=False, trials=6):
    rng = np.random.default_rng(seed)
    q = QBank.create(STATE_DIM, rng)
    return run_experiment(
        maze,
        [ScheduleEntry(TaskId.ALTERNATION, trials, Phase.RECORDING)],
        config,
        q,
        rng,
        model,
        with_replays=with_replays,
        mazes=mazes,
    )


def test_run_logs_every_trial(maze, mazes):
    log = _run(maze, mazes, 5, AgentConfig(replay_budget=0))
    assert [t.trial for t in log.trials] == list(range(6))
    assert all(t.phase == Phase.RECORDING and t.task == TaskId.ALTERNATION for t in log.trials)
    assert all(t.choice in (Side.LEFT, Side.RIGHT) for t in log.trials)
    # before any reward either side is correct
    assert log.trials[0].correct
    assert sum(t.steps for t in log.trials) == len(log.steps)
    assert log.steps_frame().shape == (len(log.steps), 7)


def test_agent_never_steps_backward(maze, mazes):
    log = _run(maze, mazes, 11, AgentConfig(replay_budget=0), trials=10)
    cells = [s.cell for s in log.steps]
    assert cells[0] == START
    for a, b in zip(cells, cells[2:]):
        assert a != b


def test_runs_are_deterministic(maze, mazes):
    first = _run(maze, mazes, 3, AgentConfig(replay_budget=0))
    second = _run(maze, mazes, 3, AgentConfig(replay_budget=0))
    assert first.trials == second.trials
    assert first.steps_frame().equals(second.steps_frame())


def test_zero_budget_matches_no_replays(maze, mazes):
    plain = _run(maze, mazes, 8, AgentConfig(replay_budget=0))
    replayed = _run(maze, mazes, 8, AgentConfig(replay_budget=0), FanModel(), with_replays=True)
    assert plain.trials == replayed.trials
    assert replayed.replay_events == []


def test_replays_happen_at_reward_sites(maze, mazes):
    log = _run(maze, mazes, 4, AgentConfig(replay_budget=10), SilentModel(), with_replays=True)
    assert log.replay_events
    assert {e.agent_cell for e in log.replay_events} <= {LEFT_SITE, RIGHT_SITE}
    stops = [e.stop for e in log.replay_events]
    assert stops == sorted(stops)
    rewarded = sum(1 for s in log.steps if s.reward > 0)
    assert max(stops) < rewarded


def test_replays_need_a_model(maze, mazes):
    with pytest.raises(ValueError):
        _run(maze, mazes, 1, AgentConfig(), with_replays=True)


def test_lap_step_limit_closes_the_trial(maze, mazes):
    log = _run(maze, mazes, 2, AgentConfig(replay_budget=0, max_lap_steps=3), trials=2)
    assert all(t.steps == 3 and not t.correct and t.choice == Side.NONE for t in log.trials)


def test_every_site_visit_passes_t2(maze, mazes):
    for task in (TaskId.RIGHT, TaskId.LEFT, TaskId.ALTERNATION):
        rng = np.random.default_rng(21)
        log = run_experiment(
            maze,
            [ScheduleEntry(task, 40)],
            AgentConfig(replay_budget=0, beta=1.0),
            QBank.create(STATE_DIM, rng),
            rng,
            mazes=mazes,
        )
        for trial in log.trials:
            cells = [s.cell for s in log.steps if s.trial == trial.trial]
            if trial.choice != Side.NONE:
                assert T2 in cells
                assert T1 in cells or trial.trial == 0


def test_queue_stays_empty_without_replays(maze, mazes, monkeypatch):
    pushes: list[float] = []
    monkeypatch.setattr(PrioritizedQueue, "push", lambda self, state, priority: pushes.append(priority))
    _run(maze, mazes, 6, AgentConfig(replay_budget=0), FanModel(), with_replays=True)
    _run(maze, mazes, 6, AgentConfig(replay_budget=5), with_replays=False)
    assert pushes == []
    _run(maze, mazes, 6, AgentConfig(replay_budget=5), SilentModel(), with_replays=True, trials=1)
    assert pushes


def _alternation_curve(maze, mazes, model, budget, seeds, trials):
    runs = {}
    for seed in seeds:
        rng = np.random.default_rng(seed)
        log = run_experiment(
            maze,
            [ScheduleEntry(TaskId.ALTERNATION, trials)],
            AgentConfig(replay_budget=budget),
            QBank.create(STATE_DIM, rng),
            rng,
            model if budget > 0 else None,
            with_replays=budget > 0,
            mazes=mazes,
        )
        runs[seed] = log.trials
    return mean_curve(runs, window=20)


@pytest.mark.slow
def test_replays_learn_alternation_faster(maze, mazes, trained_world_model):
    seeds = range(4)
    dynaq = trials_to_threshold(
        _alternation_curve(maze, mazes, trained_world_model, 20, seeds, 400), 0.2
    )
    qlearning = trials_to_threshold(
        _alternation_curve(maze, mazes, trained_world_model, 0, seeds, 400), 0.2
    )
    assert dynaq is not None and dynaq <= 300
    assert qlearning is None or qlearning > dynaq
