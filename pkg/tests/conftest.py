import numpy as np
import pytest

from src.agent.dynaq import task_mazes
from src.agent.world_model import WorldModel, collect_dataset, learn
from src.core.config import DEFAULT_MAZE_FILE
from src.core.enums import TaskId
from src.core.models import GalmoConfig
from src.maze.env import Maze, load_maze

# Cell ids of the shipped layout (row-major over open squares).
T2 = 4
LEFT_SITE = 10
RIGHT_SITE = 12
STEM = (20, 17, 14, 11)
START = 20
T1 = 26


@pytest.fixture(scope="session")
def maze() -> Maze:
    return load_maze(DEFAULT_MAZE_FILE)


@pytest.fixture(scope="session")
def mazes(maze: Maze) -> dict[TaskId, Maze]:
    return task_mazes(maze, list(TaskId))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def trained_world_model(mazes: dict[TaskId, Maze]) -> WorldModel:
    """Off-line model of tasks 3, 4 and 5; only slow tests ask for it."""
    tasks = [TaskId.RIGHT, TaskId.LEFT, TaskId.ALTERNATION]
    return learn(collect_dataset(mazes, tasks), GalmoConfig(max_epoch=1000), np.random.default_rng(7))
