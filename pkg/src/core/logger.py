import logging
from src.core.config import settings

logger = logging.getLogger("replay_dynaq")
logger.setLevel(settings.log_level.upper())
if not logger.handlers:
    _handler = logging.StreamHandler()
    _handler.setFormatter(logging.Formatter("%(levelname)s:     %(message)s"))
    logger.addHandler(_handler)
