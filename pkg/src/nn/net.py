from __future__ import annotations
import copy
import numpy as np
from scipy.special import expit

from src.core.enums import NetKind
from src.core.exceptions import DimensionError
from src.core.models import NetBundle, NetJS

TARGET_FLOOR = 0.001
TARGET_CEILING = 0.999

# Default per-kind bundles; gates reuse the predecessor bundle.
DEFAULT_BUNDLES: dict[NetKind, NetBundle] = {
    NetKind.Q: NetBundle(hidden=10, init_bound=0.05, learning_rate=0.5, hidden_slope=1.0, output_slope=0.4),
    NetKind.R: NetBundle(hidden=16, init_bound=0.0045, learning_rate=0.1, hidden_slope=1.0, output_slope=0.4),
    NetKind.P: NetBundle(hidden=26, init_bound=0.1, learning_rate=0.1, hidden_slope=0.9, output_slope=0.5),
    NetKind.G: NetBundle(hidden=26, init_bound=0.1, learning_rate=0.1, hidden_slope=0.9, output_slope=0.5),
}


class LayeredNet:
    """Two-layer feedforward network with slope-parameterised sigmoid
    units, trained one sample at a time on ½‖out − target‖²."""

    def __init__(
        self,
        kind: NetKind,
        w1: np.ndarray,
        b1: np.ndarray,
        w2: np.ndarray,
        b2: np.ndarray,
        hidden_slope: float,
        output_slope: float,
        learning_rate: float,
    ):
        self.kind = kind
        self.w1 = w1
        self.b1 = b1
        self.w2 = w2
        self.b2 = b2
        self.hidden_slope = hidden_slope
        self.output_slope = output_slope
        self.learning_rate = learning_rate

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def output_dim(self) -> int:
        return self.w2.shape[0]

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,):
            raise DimensionError(
                f"{self.kind}-net expects input of length {self.input_dim}, got shape {x.shape}."
            )
        return x

    def _check_target(self, target: np.ndarray | float) -> np.ndarray:
        t = np.atleast_1d(np.asarray(target, dtype=np.float64))
        if t.shape != (self.output_dim,):
            raise DimensionError(
                f"{self.kind}-net expects target of length {self.output_dim}, got shape {t.shape}."
            )
        return np.clip(t, TARGET_FLOOR, TARGET_CEILING)

    def _activations(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        hidden = expit(self.hidden_slope * (self.w1 @ x + self.b1))
        out = expit(self.output_slope * (self.w2 @ hidden + self.b2))
        return hidden, out

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self._activations(self._check_input(x))[1]

    def loss(self, x: np.ndarray, target: np.ndarray | float) -> float:
        out = self.forward(x)
        return 0.5 * float(np.sum((out - self._check_target(target)) ** 2))

    def gradients(
        self, x: np.ndarray, target: np.ndarray | float
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(dW1, db1, dW2, db2) of the squared-error loss."""
        x = self._check_input(x)
        t = self._check_target(target)
        hidden, out = self._activations(x)
        delta_out = (out - t) * self.output_slope * out * (1.0 - out)
        delta_hidden = (self.w2.T @ delta_out) * self.hidden_slope * hidden * (1.0 - hidden)
        return (
            np.outer(delta_hidden, x),
            delta_hidden,
            np.outer(delta_out, hidden),
            delta_out,
        )

    def backprop(self, x: np.ndarray, target: np.ndarray | float) -> None:
        """One plain SGD step; targets are clamped to the sigmoid codomain."""
        dw1, db1, dw2, db2 = self.gradients(x, target)
        lr = self.learning_rate
        self.w1 -= lr * dw1
        self.b1 -= lr * db1
        self.w2 -= lr * dw2
        self.b2 -= lr * db2

    def l1_error(self, x: np.ndarray, target: np.ndarray | float) -> float:
        t = np.atleast_1d(np.asarray(target, dtype=np.float64))
        out = self.forward(x)
        if t.shape != out.shape:
            raise DimensionError(
                f"{self.kind}-net output has length {out.shape[0]}, target shape {t.shape}."
            )
        return float(np.sum(np.abs(out - t)))

    def clone(self) -> LayeredNet:
        return copy.deepcopy(self)

    def to_record(self) -> NetJS:
        return NetJS(
            kind=self.kind,
            input_dim=self.input_dim,
            hidden_dim=self.hidden_dim,
            output_dim=self.output_dim,
            hidden_slope=self.hidden_slope,
            output_slope=self.output_slope,
            learning_rate=self.learning_rate,
            w1=self.w1.ravel().tolist(),
            b1=self.b1.tolist(),
            w2=self.w2.ravel().tolist(),
            b2=self.b2.tolist(),
        )

    @classmethod
    def from_record(cls, record: NetJS) -> LayeredNet:
        return cls(
            kind=record.kind,
            w1=np.asarray(record.w1, dtype=np.float64).reshape(record.hidden_dim, record.input_dim),
            b1=np.asarray(record.b1, dtype=np.float64),
            w2=np.asarray(record.w2, dtype=np.float64).reshape(record.output_dim, record.hidden_dim),
            b2=np.asarray(record.b2, dtype=np.float64),
            hidden_slope=record.hidden_slope,
            output_slope=record.output_slope,
            learning_rate=record.learning_rate,
        )


def new_net(
    kind: NetKind,
    input_dim: int,
    output_dim: int,
    rng: np.random.Generator,
    bundles: dict[NetKind, NetBundle] | None = None,
) -> LayeredNet:
    """Weights i.i.d. uniform in ±bound(kind), biases zero."""
    if input_dim <= 0 or output_dim <= 0:
        raise DimensionError(f"Network dimensions must be positive, got {input_dim}->{output_dim}.")
    bundle = (bundles or DEFAULT_BUNDLES)[kind]
    bound = bundle.init_bound
    return LayeredNet(
        kind=kind,
        w1=rng.uniform(-bound, bound, size=(bundle.hidden, input_dim)),
        b1=np.zeros(bundle.hidden),
        w2=rng.uniform(-bound, bound, size=(output_dim, bundle.hidden)),
        b2=np.zeros(output_dim),
        hidden_slope=bundle.hidden_slope,
        output_slope=bundle.output_slope,
        learning_rate=bundle.learning_rate,
    )
