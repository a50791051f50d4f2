from . import galmo_growth  # noqa: F401
from . import qlearning_vs_dynaq  # noqa: F401
from . import replay_stats  # noqa: F401
from . import worldmodel_online_vs_offline  # noqa: F401
