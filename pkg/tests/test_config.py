from pathlib import Path
import pytest

from src.core.config import (
    DEFAULT_MAZE_FILE,
    Settings,
    load_settings,
    parse_overrides,
    parse_schedule,
    parse_tasks,
)
from src.core.enums import NetKind, SweepActions, TaskId
from src.core.exceptions import ConfigError


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    """No stray .env file or environment variable leaks into a test."""
    monkeypatch.chdir(tmp_path)
    for key in ("GAMMA", "SEED", "DYNAQ_OUT_DIR", "OUT_DIR", "REPLAY_BUDGET", "MAZE_FILE"):
        monkeypatch.delenv(key, raising=False)


def test_defaults():
    s = Settings(_env_file=None)
    assert s.maze_file == DEFAULT_MAZE_FILE
    assert (s.gamma, s.beta, s.replay_budget, s.reward_magnitude) == (0.9, 20.0, 20, 0.8)
    assert (s.galmo_w, s.max_epoch, s.gate_threshold, s.null_epsilon) == (3.0, 4000, 0.5, 0.5)
    assert s.sweep_actions == SweepActions.ALL
    bundles = s.net_bundles()
    assert [bundles[k].hidden for k in (NetKind.Q, NetKind.R, NetKind.P)] == [10, 16, 26]
    assert [bundles[k].init_bound for k in (NetKind.Q, NetKind.R, NetKind.P)] == [0.05, 0.0045, 0.1]
    assert bundles[NetKind.G] == bundles[NetKind.P]
    assert s.agent_config(replay_budget=0).replay_budget == 0
    assert s.encoding_config().radius == 3.0


def test_effective_config_uses_environment_names():
    dumped = Settings(_env_file=None).dump_effective_config()
    assert dumped["GAMMA"] == 0.9
    assert dumped["OUT_DIR"] == "runs"


def test_parse_schedule():
    assert parse_schedule("1:40, 5:200") == [(TaskId.RIGHT_LEFT_BLOCKED, 40), (TaskId.ALTERNATION, 200)]


@pytest.mark.parametrize("text", ["", "6:10", "1:0", "1-40", "3:x"])
def test_parse_schedule_rejects(text):
    with pytest.raises(ConfigError):
        parse_schedule(text)


def test_parse_tasks():
    assert parse_tasks("1,5") == [TaskId.RIGHT_LEFT_BLOCKED, TaskId.ALTERNATION]
    with pytest.raises(ConfigError):
        parse_tasks("9")
    with pytest.raises(ConfigError):
        parse_tasks(" , ")


def test_parse_overrides():
    assert parse_overrides(["GAMMA=0.8", "MAX_EPOCH = 1"]) == {"GAMMA": "0.8", "MAX_EPOCH": "1"}
    with pytest.raises(ConfigError):
        parse_overrides(["NOT_A_KEY=1"])
    with pytest.raises(ConfigError):
        parse_overrides(["GAMMA"])


def test_file_environment_and_override_precedence(tmp_path, monkeypatch):
    config = tmp_path / "run.conf"
    config.write_text("GAMMA=0.7\nSEED=4\n", encoding="utf-8")
    loaded = load_settings(config)
    assert (loaded.gamma, loaded.seed) == (0.7, 4)

    monkeypatch.setenv("GAMMA", "0.65")
    assert load_settings(config).gamma == 0.65
    assert load_settings(config, {"GAMMA": "0.6"}).gamma == 0.6
    assert load_settings(config, {"GAMMA": "0.6"}).seed == 4


def test_out_dir_from_environment(monkeypatch):
    monkeypatch.setenv("DYNAQ_OUT_DIR", "elsewhere")
    assert load_settings().out_dir == Path("elsewhere")


@pytest.mark.parametrize(
    "overrides",
    [{"GAMMA": "1.5"}, {"REPLAY_BUDGET": "-1"}, {"EXPERIMENT": "nope"}, {"MAZE_FILE": "missing.maze"}],
)
def test_invalid_settings_raise_config_error(overrides):
    with pytest.raises(ConfigError):
        load_settings(None, overrides)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_settings(tmp_path / "absent.conf")
