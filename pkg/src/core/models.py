from __future__ import annotations
from typing import Literal
from pydantic import BaseModel, Field, NonNegativeInt, PositiveInt

from src.core.enums import (
    Action,
    ExperimentName,
    NetKind,
    Phase,
    PlaceKernel,
    ShuffleMode,
    Side,
    SweepActions,
    TaskId,
)

SCHEMA_VERSION = 1


# Library-level configuration, derived from Settings.


class NetBundle(BaseModel):
    hidden: PositiveInt
    init_bound: float = Field(gt=0)
    learning_rate: float = Field(gt=0)
    hidden_slope: float = Field(gt=0)
    output_slope: float = Field(gt=0)

    model_config = {"frozen": True}


class EncodingConfig(BaseModel):
    kernel: PlaceKernel = PlaceKernel.LINEAR
    radius: float = Field(default=3.0, gt=0)

    model_config = {"frozen": True}


class GalmoConfig(BaseModel):
    w: float = Field(default=3.0, gt=0)
    max_epoch: NonNegativeInt = 4000
    gate_threshold: float = Field(default=0.5, gt=0, le=1)
    max_experts: NonNegativeInt = 0  # 0 = unlimited
    shuffle: ShuffleMode = ShuffleMode.EPOCH
    error_log_every: PositiveInt = 10
    # an outlier whose closest expert it spawned itself trains that expert
    retrain_own_clone: bool = True

    model_config = {"frozen": True}


class AgentConfig(BaseModel):
    gamma: float = Field(default=0.9, ge=0, lt=1)
    beta: float = Field(default=20.0, gt=0)
    beta_final: float | None = Field(default=None, gt=0)
    beta_anneal_trials: NonNegativeInt = 0
    replay_budget: NonNegativeInt = 20
    reward_magnitude: float = Field(default=0.8, gt=0, le=1)
    null_epsilon: float = Field(default=0.5, ge=0)
    gate_threshold: float = Field(default=0.5, gt=0, le=1)
    max_trials: NonNegativeInt = 1500
    max_lap_steps: PositiveInt = 200
    sweep_actions: SweepActions = SweepActions.ALL
    coalesce_queue: bool = False
    snap_replays: bool = False

    model_config = {"frozen": True}

    def beta_at(self, trial: int) -> float:
        """Inverse temperature for a given trial, linearly annealed when enabled."""
        if self.beta_final is None or self.beta_anneal_trials == 0:
            return self.beta
        fraction = min(1.0, trial / self.beta_anneal_trials)
        return self.beta + fraction * (self.beta_final - self.beta)


# Records written to disk.


class TrialJS(BaseModel):
    trial: NonNegativeInt
    task: TaskId
    phase: Phase
    choice: Side
    correct: bool
    steps: PositiveInt


class ReplayEventJS(BaseModel):
    stop: NonNegativeInt
    replay_index: NonNegativeInt
    task: TaskId
    phase: Phase
    state: list[float]
    decoded_cell: int | None
    priority: float
    agent_cell: NonNegativeInt
    updates_performed: NonNegativeInt


class NetJS(BaseModel):
    kind: NetKind
    input_dim: PositiveInt
    hidden_dim: PositiveInt
    output_dim: PositiveInt
    hidden_slope: float
    output_slope: float
    learning_rate: float
    # row-major
    w1: list[float]
    b1: list[float]
    w2: list[float]
    b2: list[float]


class EnsembleJS(BaseModel):
    kind: NetKind
    experts: list[NetJS]
    gates: list[NetJS]
    w: float
    theta_history: list[float | None] = []
    # None when the ensemble uses the default per-kind bundles
    bundles: dict[NetKind, NetBundle] | None = None


class TransitionSampleJS(BaseModel):
    succ: list[float]
    pred: list[float]
    action: Action
    reward: float
    task: TaskId


class RunHeaderJS(BaseModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    experiment: ExperimentName
    label: str
    seed: int
    config: dict[str, object]
