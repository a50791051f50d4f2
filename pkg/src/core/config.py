from __future__ import annotations
from pathlib import Path
from typing import Any
from pydantic import AliasChoices, Field, NonNegativeInt, PositiveInt, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.core.enums import (
    DatasetMode,
    ExperimentName,
    NetKind,
    PlaceKernel,
    RewardInput,
    ShuffleMode,
    SweepActions,
    TaskId,
)
from src.core.exceptions import ConfigError
from src.core.models import AgentConfig, EncodingConfig, GalmoConfig, NetBundle

DEFAULT_MAZE_FILE = Path(__file__).resolve().parent.parent / "maze" / "layouts" / "double_t.maze"


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        populate_by_name=True,
    )

    log_level: str = Field(default="info", alias="LOG_LEVEL")

    # Run
    experiment: ExperimentName | None = Field(default=None, alias="EXPERIMENT")
    seed: int = Field(default=0, alias="SEED")
    seeds: PositiveInt = Field(default=1, alias="SEEDS")
    workers: PositiveInt = Field(default=1, alias="WORKERS")
    out_dir: Path = Field(
        default=Path("runs"),
        alias="OUT_DIR",
        validation_alias=AliasChoices("DYNAQ_OUT_DIR", "OUT_DIR", "out_dir"),
    )
    schedule: str | None = Field(default=None, alias="SCHEDULE")

    # Maze and state coding
    maze_file: Path = Field(default=DEFAULT_MAZE_FILE, alias="MAZE_FILE")
    place_kernel: PlaceKernel = Field(default=PlaceKernel.LINEAR, alias="PLACE_KERNEL")
    place_radius: float = Field(default=3.0, gt=0, alias="PLACE_RADIUS")
    left_arm_block: str = Field(default="", alias="LEFT_ARM_BLOCK")
    right_arm_block: str = Field(default="", alias="RIGHT_ARM_BLOCK")

    # Dyna-Q agent
    gamma: float = Field(default=0.9, ge=0, lt=1, alias="GAMMA")
    beta: float = Field(default=20.0, gt=0, alias="BETA")
    beta_final: float | None = Field(default=None, gt=0, alias="BETA_FINAL")
    beta_anneal_trials: NonNegativeInt = Field(default=0, alias="BETA_ANNEAL_TRIALS")
    replay_budget: NonNegativeInt = Field(default=20, alias="REPLAY_BUDGET")
    reward_magnitude: float = Field(default=0.8, gt=0, le=1, alias="REWARD_MAGNITUDE")
    null_epsilon: float = Field(default=0.5, ge=0, alias="NULL_EPSILON")
    max_trials: NonNegativeInt = Field(default=1500, alias="MAX_TRIALS")
    max_lap_steps: PositiveInt = Field(default=200, alias="MAX_LAP_STEPS")
    sweep_actions: SweepActions = Field(default=SweepActions.ALL, alias="SWEEP_ACTIONS")
    coalesce_queue: bool = Field(default=False, alias="COALESCE_QUEUE")
    snap_replays: bool = Field(default=False, alias="SNAP_REPLAYS")

    # GALMO
    galmo_w: float = Field(default=3.0, gt=0, alias="GALMO_W")
    max_epoch: NonNegativeInt = Field(default=4000, alias="MAX_EPOCH")
    gate_threshold: float = Field(default=0.5, gt=0, le=1, alias="GATE_THRESHOLD")
    max_experts: NonNegativeInt = Field(default=0, alias="MAX_EXPERTS")
    galmo_shuffle: ShuffleMode = Field(default=ShuffleMode.EPOCH, alias="GALMO_SHUFFLE")
    error_log_every: PositiveInt = Field(default=10, alias="ERROR_LOG_EVERY")
    retrain_own_clone: bool = Field(default=True, alias="RETRAIN_OWN_CLONE")

    # Networks (two layers each)
    net_layers: int = Field(default=2, ge=2, le=2, alias="NET_LAYERS")
    q_hidden: PositiveInt = Field(default=10, alias="Q_HIDDEN")
    r_hidden: PositiveInt = Field(default=16, alias="R_HIDDEN")
    p_hidden: PositiveInt = Field(default=26, alias="P_HIDDEN")
    q_init_bound: float = Field(default=0.05, gt=0, alias="Q_INIT_BOUND")
    r_init_bound: float = Field(default=0.0045, gt=0, alias="R_INIT_BOUND")
    p_init_bound: float = Field(default=0.1, gt=0, alias="P_INIT_BOUND")
    q_learning_rate: float = Field(default=0.5, gt=0, alias="Q_LEARNING_RATE")
    r_learning_rate: float = Field(default=0.1, gt=0, alias="R_LEARNING_RATE")
    p_learning_rate: float = Field(default=0.1, gt=0, alias="P_LEARNING_RATE")
    p_hidden_slope: float = Field(default=0.9, gt=0, alias="P_HIDDEN_SLOPE")
    r_hidden_slope: float = Field(default=1.0, gt=0, alias="R_HIDDEN_SLOPE")
    q_hidden_slope: float = Field(default=1.0, gt=0, alias="Q_HIDDEN_SLOPE")
    p_output_slope: float = Field(default=0.5, gt=0, alias="P_OUTPUT_SLOPE")
    r_output_slope: float = Field(default=0.4, gt=0, alias="R_OUTPUT_SLOPE")
    q_output_slope: float = Field(default=0.4, gt=0, alias="Q_OUTPUT_SLOPE")

    # World model
    reward_input: RewardInput = Field(default=RewardInput.ARRIVAL, alias="REWARD_INPUT")
    dataset_mode: DatasetMode = Field(default=DatasetMode.EXHAUSTIVE, alias="DATASET_MODE")
    wm_tasks: str = Field(default="1,2,3,4,5", alias="WM_TASKS")
    growth_tasks: str = Field(default="5", alias="GROWTH_TASKS")
    behavioral_laps: PositiveInt = Field(default=50, alias="BEHAVIORAL_LAPS")
    world_model_dir: Path | None = Field(default=None, alias="WORLD_MODEL_DIR")

    # Replay statistics protocol
    pretraining_schedule: str = Field(
        default="1:40,2:40,3:150,4:150,5:150", alias="PRETRAINING_SCHEDULE"
    )
    recording_sessions: NonNegativeInt = Field(default=6, alias="RECORDING_SESSIONS")
    session_trials: PositiveInt = Field(default=40, alias="SESSION_TRIALS")
    switch_fraction: float = Field(default=0.5, gt=0, lt=1, alias="SWITCH_FRACTION")
    match_memory: bool = Field(default=True, alias="MATCH_MEMORY")

    # Learning curves
    curve_window: PositiveInt = Field(default=20, alias="CURVE_WINDOW")
    error_threshold: float = Field(default=0.2, gt=0, lt=1, alias="ERROR_THRESHOLD")

    def net_bundles(self) -> dict[NetKind, NetBundle]:
        """Constructs the per-kind network parameter bundles. Gates share
        the predecessor bundle."""
        p_bundle = NetBundle(
            hidden=self.p_hidden,
            init_bound=self.p_init_bound,
            learning_rate=self.p_learning_rate,
            hidden_slope=self.p_hidden_slope,
            output_slope=self.p_output_slope,
        )
        return {
            NetKind.Q: NetBundle(
                hidden=self.q_hidden,
                init_bound=self.q_init_bound,
                learning_rate=self.q_learning_rate,
                hidden_slope=self.q_hidden_slope,
                output_slope=self.q_output_slope,
            ),
            NetKind.R: NetBundle(
                hidden=self.r_hidden,
                init_bound=self.r_init_bound,
                learning_rate=self.r_learning_rate,
                hidden_slope=self.r_hidden_slope,
                output_slope=self.r_output_slope,
            ),
            NetKind.P: p_bundle,
            NetKind.G: p_bundle,
        }

    def galmo_config(self, shuffle: ShuffleMode | None = None) -> GalmoConfig:
        return GalmoConfig(
            w=self.galmo_w,
            max_epoch=self.max_epoch,
            gate_threshold=self.gate_threshold,
            max_experts=self.max_experts,
            shuffle=shuffle or self.galmo_shuffle,
            error_log_every=self.error_log_every,
            retrain_own_clone=self.retrain_own_clone,
        )

    def agent_config(self, replay_budget: int | None = None) -> AgentConfig:
        return AgentConfig(
            gamma=self.gamma,
            beta=self.beta,
            beta_final=self.beta_final,
            beta_anneal_trials=self.beta_anneal_trials,
            replay_budget=self.replay_budget if replay_budget is None else replay_budget,
            reward_magnitude=self.reward_magnitude,
            null_epsilon=self.null_epsilon,
            gate_threshold=self.gate_threshold,
            max_trials=self.max_trials,
            max_lap_steps=self.max_lap_steps,
            sweep_actions=self.sweep_actions,
            coalesce_queue=self.coalesce_queue,
            snap_replays=self.snap_replays,
        )

    def encoding_config(self) -> EncodingConfig:
        return EncodingConfig(kernel=self.place_kernel, radius=self.place_radius)

    def dump_effective_config(self) -> dict[str, Any]:
        """Every field keyed by its alias, JSON-compatible."""
        return self.model_dump(mode="json", by_alias=True)


def parse_tasks(text: str) -> list[TaskId]:
    """Parses a comma separated task list such as '1,2,5'."""
    try:
        tasks = [TaskId(int(part)) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"Invalid task list '{text}': {e}") from e
    if not tasks:
        raise ConfigError(f"Task list '{text}' is empty.")
    return tasks


def parse_schedule(text: str) -> list[tuple[TaskId, int]]:
    """Parses 'task:trials' pairs such as '1:40,2:40,5:200'."""
    schedule: list[tuple[TaskId, int]] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        task_str, sep, trials_str = part.partition(":")
        try:
            if not sep:
                raise ValueError("missing ':'")
            task, trials = TaskId(int(task_str)), int(trials_str)
            if trials <= 0:
                raise ValueError("trial count must be positive")
        except ValueError as e:
            raise ConfigError(f"Invalid schedule entry '{part}' in '{text}': {e}") from e
        schedule.append((task, trials))
    if not schedule:
        raise ConfigError(f"Schedule '{text}' is empty.")
    return schedule


def _known_keys() -> set[str]:
    keys: set[str] = set()
    for name, field in Settings.model_fields.items():
        keys.add(name)
        if field.alias:
            keys.add(field.alias)
    keys.add("DYNAQ_OUT_DIR")
    return keys


def parse_overrides(pairs: list[str]) -> dict[str, str]:
    """Turns repeated '--set KEY=value' strings into init kwargs."""
    known = _known_keys()
    overrides: dict[str, str] = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"Override '{pair}' is not of the form KEY=value.")
        if key not in known:
            raise ConfigError(f"Unknown configuration key '{key}'.")
        overrides[key] = value.strip()
    return overrides


def load_settings(config_file: Path | None = None, overrides: dict[str, Any] | None = None) -> Settings:
    """Builds Settings from an optional key=value file plus explicit
    overrides. Overrides beat environment variables, which beat the file."""
    if config_file is not None and not config_file.is_file():
        raise ConfigError(f"Config file '{config_file}' does not exist.")
    try:
        kwargs: dict[str, Any] = dict(overrides or {})
        if config_file is not None:
            kwargs["_env_file"] = config_file
        loaded = Settings(**kwargs)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e
    if not loaded.maze_file.is_file():
        raise ConfigError(f"Maze file '{loaded.maze_file}' does not exist.")
    return loaded


settings = Settings()
