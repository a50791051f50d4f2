from __future__ import annotations
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from src.nn.galmo import ExpertEnsemble


class MazeError(ValueError):
    """Invalid maze file, layout or blocking configuration."""


class InvalidActionError(ValueError):
    """A masked action (wall or backward move) was passed to the simulator."""


class DimensionError(ValueError):
    """Vector length does not match a network or ensemble."""


class ConfigError(ValueError):
    """Malformed schedule, override or missing referenced file."""


class SchemaMismatchError(ValueError):
    """Two run logs cannot be compared."""


class RunawayGrowthError(RuntimeError):
    """GALMO kept duplicating experts past the hard limit."""

    def __init__(self, message: str, ensemble: ExpertEnsemble, checkpoint: Path | None = None):
        super().__init__(message)
        self.ensemble = ensemble
        self.checkpoint = checkpoint

    def __reduce__(self):
        return (type(self), (str(self), self.ensemble, self.checkpoint))
