from __future__ import annotations
import math
from dataclasses import dataclass, field
import numpy as np

from src.core.enums import NetKind, ShuffleMode
from src.core.exceptions import DimensionError, RunawayGrowthError
from src.core.logger import logger
from src.core.models import EnsembleJS, GalmoConfig, NetBundle
from src.nn.net import LayeredNet, new_net

HARD_EXPERT_LIMIT = 64

Sample = tuple[np.ndarray, np.ndarray]
SampleSet = list[Sample]


class ExpertEnsemble:
    """Paired output networks and gate networks; a gate says whether its
    expert's output applies to an input."""

    def __init__(
        self,
        kind: NetKind,
        experts: list[LayeredNet],
        gates: list[LayeredNet],
        bundles: dict[NetKind, NetBundle] | None = None,
    ):
        if not experts or len(experts) != len(gates):
            raise ValueError(
                f"Ensemble needs as many gates as experts (>= 1), got "
                f"{len(experts)} experts and {len(gates)} gates."
            )
        self.kind = kind
        self.experts = experts
        self.gates = gates
        self.bundles = bundles
        self.theta_history: list[float] = []
        # expert index -> index of the sample it was spawned for
        self.spawned_for: dict[int, int] = {}

    @classmethod
    def create(
        cls,
        kind: NetKind,
        input_dim: int,
        output_dim: int,
        rng: np.random.Generator,
        bundles: dict[NetKind, NetBundle] | None = None,
    ) -> ExpertEnsemble:
        return cls(
            kind,
            [new_net(kind, input_dim, output_dim, rng, bundles)],
            [new_net(NetKind.G, input_dim, 1, rng, bundles)],
            bundles,
        )

    @property
    def input_dim(self) -> int:
        return self.experts[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.experts[0].output_dim

    def __len__(self) -> int:
        return len(self.experts)

    def errors(self, x: np.ndarray, y: np.ndarray) -> list[float]:
        return [expert.l1_error(x, y) for expert in self.experts]

    def gate_values(self, x: np.ndarray) -> list[float]:
        return [float(gate.forward(x)[0]) for gate in self.gates]

    def predict_all(self, x: np.ndarray, gate_threshold: float = 0.5) -> list[tuple[np.ndarray, float]]:
        """Outputs of every expert whose gate exceeds the threshold, in expert order."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise DimensionError(
                f"Ensemble expects input of length {self.input_dim}, got shape {x.shape}."
            )
        predictions: list[tuple[np.ndarray, float]] = []
        for expert, gate in zip(self.experts, self.gates):
            gate_value = float(gate.forward(x)[0])
            if gate_value > gate_threshold:
                predictions.append((expert.forward(x), gate_value))
        return predictions

    def to_record(self, w: float) -> EnsembleJS:
        return EnsembleJS(
            kind=self.kind,
            experts=[net.to_record() for net in self.experts],
            gates=[net.to_record() for net in self.gates],
            w=w,
            theta_history=[t if math.isfinite(t) else None for t in self.theta_history],
            bundles=self.bundles,
        )

    @classmethod
    def from_record(cls, record: EnsembleJS) -> ExpertEnsemble:
        ensemble = cls(
            record.kind,
            [LayeredNet.from_record(r) for r in record.experts],
            [LayeredNet.from_record(r) for r in record.gates],
            record.bundles,
        )
        ensemble.theta_history = [math.inf if t is None else t for t in record.theta_history]
        return ensemble


@dataclass
class GrowthEvent:
    epoch: int
    sample_index: int
    source_expert: int
    error: float
    theta: float


@dataclass
class EpochResult:
    theta: float
    min_errors: list[float]
    growth: list[GrowthEvent] = field(default_factory=list)


@dataclass
class TrainingReport:
    theta_history: list[float] = field(default_factory=list)
    expert_counts: list[int] = field(default_factory=list)
    growth_events: list[GrowthEvent] = field(default_factory=list)
    # (epoch, sample index, min L1 error, expert count)
    error_rows: list[tuple[int, int, float, int]] = field(default_factory=list)


def error_quantiles(errors: list[float] | np.ndarray) -> tuple[float, float]:
    """(median, Q3) with linear interpolation at q·(n−1)."""
    values = np.asarray(errors, dtype=np.float64)
    median, q3 = np.quantile(values, [0.5, 0.75], method="linear")
    return float(median), float(q3)


def next_threshold(errors: list[float] | np.ndarray, w: float) -> float:
    median, q3 = error_quantiles(errors)
    return median + w * (q3 - median)


def _check_samples(ensemble: ExpertEnsemble, samples: SampleSet) -> None:
    for i, (x, y) in enumerate(samples):
        if np.shape(x) != (ensemble.input_dim,) or np.shape(y) != (ensemble.output_dim,):
            raise DimensionError(
                f"Sample {i} has shapes {np.shape(x)} -> {np.shape(y)}, ensemble "
                f"expects ({ensemble.input_dim},) -> ({ensemble.output_dim},)."
            )


def train_epoch(
    ensemble: ExpertEnsemble,
    samples: SampleSet,
    theta: float,
    rng: np.random.Generator,
    config: GalmoConfig = GalmoConfig(),
    epoch: int = 0,
    indices: list[int] | None = None,
    log_prefix: str = "",
) -> EpochResult:
    """One pass over the samples in the given order. Only the expert with
    the smallest error is trained; a sample whose smallest error reaches
    theta is handed to a fresh copy of that expert instead, unless that
    expert is already the copy made for this sample."""
    _check_samples(ensemble, samples)
    one, zero = np.ones(1), np.zeros(1)
    min_errors: list[float] = []
    growth: list[GrowthEvent] = []
    cap_warned = False
    for position, (x, y) in enumerate(samples):
        sample_index = indices[position] if indices is not None else position
        errors = ensemble.errors(x, y)
        best = int(np.argmin(errors))
        best_error = errors[best]
        min_errors.append(best_error)
        capped = 0 < config.max_experts <= len(ensemble)
        own_clone = config.retrain_own_clone and ensemble.spawned_for.get(best) == sample_index
        if best_error < theta or capped or own_clone:
            if capped and best_error >= theta and not cap_warned:
                logger.warning(
                    f"{log_prefix}Epoch {epoch}: expert cap {config.max_experts} "
                    "reached, outliers train the closest expert instead."
                )
                cap_warned = True
            ensemble.experts[best].backprop(x, y)
            for k, gate in enumerate(ensemble.gates):
                gate.backprop(x, one if k == best else zero)
            continue
        if len(ensemble) >= HARD_EXPERT_LIMIT:
            raise RunawayGrowthError(
                f"{log_prefix}Epoch {epoch}: ensemble reached {HARD_EXPERT_LIMIT} "
                f"experts and sample {sample_index} still asks for another.",
                ensemble,
            )
        clone = ensemble.experts[best].clone()
        clone.backprop(x, y)
        gate = new_net(NetKind.G, ensemble.input_dim, 1, rng, ensemble.bundles)
        gate.backprop(x, one)
        ensemble.experts.append(clone)
        ensemble.gates.append(gate)
        ensemble.spawned_for[len(ensemble) - 1] = sample_index
        growth.append(GrowthEvent(epoch, sample_index, best, best_error, theta))
        logger.info(
            f"{log_prefix}Epoch {epoch}: sample {sample_index} error {best_error:.4f} "
            f">= theta {theta:.4f}, duplicated expert {best} "
            f"(now {len(ensemble)} experts)."
        )
    return EpochResult(next_threshold(min_errors, config.w), min_errors, growth)


def train(
    ensemble: ExpertEnsemble,
    samples: SampleSet,
    config: GalmoConfig,
    rng: np.random.Generator,
    report: TrainingReport | None = None,
    log_prefix: str = "",
) -> ExpertEnsemble:
    if not samples or config.max_epoch == 0:
        return ensemble
    theta = math.inf
    order = np.arange(len(samples))
    if config.shuffle == ShuffleMode.ONCE:
        order = rng.permutation(len(samples))
    for epoch in range(config.max_epoch):
        if config.shuffle == ShuffleMode.EPOCH:
            order = rng.permutation(len(samples))
        indices = [int(i) for i in order]
        result = train_epoch(
            ensemble,
            [samples[i] for i in indices],
            theta,
            rng,
            config,
            epoch=epoch,
            indices=indices,
            log_prefix=log_prefix,
        )
        ensemble.theta_history.append(theta)
        theta = result.theta
        if report is not None:
            report.theta_history.append(theta)
            report.expert_counts.append(len(ensemble))
            report.growth_events.extend(result.growth)
            if epoch % config.error_log_every == 0 or epoch == config.max_epoch - 1:
                report.error_rows.extend(
                    (epoch, i, e, len(ensemble)) for i, e in zip(indices, result.min_errors)
                )
    logger.info(
        f"{log_prefix}GALMO finished {config.max_epoch} epochs with "
        f"{len(ensemble)} experts (theta {theta:.4f})."
    )
    return ensemble
