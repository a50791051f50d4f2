from __future__ import annotations
import enum


class Action(enum.StrEnum):
    N = "N"
    S = "S"
    E = "E"
    W = "W"

    @property
    def reverse(self) -> Action:
        return _REVERSE[self]

    @property
    def delta(self) -> tuple[int, int]:
        """(row, col) offset of one move."""
        return _DELTA[self]


_REVERSE = {Action.N: Action.S, Action.S: Action.N, Action.E: Action.W, Action.W: Action.E}
_DELTA = {Action.N: (-1, 0), Action.S: (1, 0), Action.E: (0, 1), Action.W: (0, -1)}

ACTIONS: tuple[Action, ...] = (Action.N, Action.S, Action.E, Action.W)


class Side(enum.StrEnum):
    LEFT = enum.auto()
    RIGHT = enum.auto()
    NONE = enum.auto()

    @property
    def opposite(self) -> Side:
        if self == Side.LEFT:
            return Side.RIGHT
        if self == Side.RIGHT:
            return Side.LEFT
        return Side.NONE


class Zone(enum.StrEnum):
    LEFT = "l"
    RIGHT = "r"
    CENTRAL = "c"


class TaskId(enum.IntEnum):
    RIGHT_LEFT_BLOCKED = 1
    LEFT_RIGHT_BLOCKED = 2
    RIGHT = 3
    LEFT = 4
    ALTERNATION = 5


class NetKind(enum.StrEnum):
    Q = "Q"
    R = "R"
    P = "P"
    G = "G"


class PlaceKernel(enum.StrEnum):
    LINEAR = enum.auto()
    GAUSSIAN = enum.auto()


class ShuffleMode(enum.StrEnum):
    EPOCH = enum.auto()
    ONCE = enum.auto()
    NONE = enum.auto()


class RewardInput(enum.StrEnum):
    ARRIVAL = enum.auto()
    DEPARTURE = enum.auto()


class SweepActions(enum.StrEnum):
    ALL = enum.auto()
    LINKING = enum.auto()


class DatasetMode(enum.StrEnum):
    EXHAUSTIVE = enum.auto()
    BEHAVIORAL = enum.auto()


class Phase(enum.StrEnum):
    PRETRAINING = enum.auto()
    RECORDING = enum.auto()


class ReplayDirection(enum.StrEnum):
    FORWARD = enum.auto()
    BACKWARD = enum.auto()
    RANDOM = enum.auto()


class ReplaySide(enum.StrEnum):
    SAME = enum.auto()
    OPPOSITE = enum.auto()
    CENTRAL = enum.auto()


class StreamName(enum.IntEnum):
    """Named random sub-streams fanned out of the master seed."""

    ENV = 0
    NETS = 1
    GALMO = 2
    SOFTMAX = 3
    DATASET = 4


class ExperimentName(enum.StrEnum):
    WORLDMODEL_ONLINE_VS_OFFLINE = "worldmodel-online-vs-offline"
    GALMO_GROWTH = "galmo-growth"
    QLEARNING_VS_DYNAQ = "qlearning-vs-dynaq"
    REPLAY_STATS = "replay-stats"


class String(enum.StrEnum):
    # CLI
    USAGE_ERROR = "Usage error"
    CONFIGURATION_ERROR_DETECTED = "Configuration error detected"
    RUNTIME_FAILURE = "Runtime failure"
    RUNAWAY_GROWTH = "GALMO runaway growth, checkpoint dumped to"
    ARTIFACTS_WRITTEN = "Artifacts written to"
    RUNS_ARE_IDENTICAL = "Runs are identical"
    RUNS_DIFFER = "Runs differ on"
