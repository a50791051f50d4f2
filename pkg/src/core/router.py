from __future__ import annotations
from pathlib import Path
from typing import Any, Callable, TYPE_CHECKING
from src.core.logger import logger

if TYPE_CHECKING:
    from src.core.config import Settings
    from src.core.context import ExperimentContext

SummaryRow = dict[str, Any]
SeedHandler = Callable[["ExperimentContext"], list[SummaryRow]]
SummaryHandler = Callable[["Settings", Path, list[SummaryRow]], list[Path]]


class Router:
    """Registry of experiments: one handler run per seed, one summary
    handler run once over the merged per-seed rows."""

    def __init__(self):
        self.routes: dict[str, SeedHandler] = {}
        self.summaries: dict[str, SummaryHandler] = {}

    def route(self, path: str) -> Callable[[SeedHandler], SeedHandler]:
        def decorator(func: SeedHandler) -> SeedHandler:
            if path in self.routes:
                raise ValueError(f"Route '{path}' is already registered.")
            self.routes[path] = func
            return func

        return decorator

    def summary(self, path: str) -> Callable[[SummaryHandler], SummaryHandler]:
        def decorator(func: SummaryHandler) -> SummaryHandler:
            if path in self.summaries:
                raise ValueError(f"Summary for '{path}' is already registered.")
            self.summaries[path] = func
            return func

        return decorator

    def _lookup[T](self, table: dict[str, T], path: str) -> T:
        if path not in table:
            available = ", ".join(f"'{key}'" for key in table)
            logger.warning(f"No route found for experiment '{path}'. Available routes: {available}")
            raise KeyError(path)
        return table[path]

    def process(self, path: str, ctx: ExperimentContext) -> list[SummaryRow]:
        handler = self._lookup(self.routes, path)
        logger.info(f"{ctx.log_prefix}Routing experiment '{path}' to {handler.__name__}.")
        try:
            return handler(ctx)
        except Exception as e:
            logger.error(f"{ctx.log_prefix}Error executing handler for '{path}': {e}", exc_info=True)
            raise

    def summarize(
        self, path: str, settings: Settings, run_root: Path, rows: list[SummaryRow]
    ) -> list[Path]:
        return self._lookup(self.summaries, path)(settings, run_root, rows)


# Create a single instance to be used across the application
router = Router()
