from __future__ import annotations
from pathlib import Path
import numpy as np

from src.agent.dynaq import QBank, RunLog, ScheduleEntry, run_experiment, task_mazes
from src.agent.world_model import WorldModel, collect_dataset, learn
from src.core.config import Settings, parse_tasks
from src.core.enums import DatasetMode, StreamName, TaskId
from src.core.logger import logger
from src.core.models import AgentConfig
from src.core.seeding import stream
from src.maze.env import STATE_DIM, Maze, load_maze
from src.store.artifacts import STEPS_FILE, seed_dir, write_csv, write_replays, write_trials


class ExperimentContext:
    """Everything one seed of one experiment needs: settings, maze, named
    random streams and its place in the output tree."""

    def __init__(self, settings: Settings, seed: int, run_root: Path):
        self.settings = settings
        self.seed = seed
        self.run_root = run_root
        self.log_prefix = f"[seed {seed}] "
        self.maze: Maze = load_maze(settings.maze_file)
        self._mazes: dict[TaskId, Maze] = {}
        self._world_model: WorldModel | None = None

    def rng(self, name: StreamName) -> np.random.Generator:
        return stream(self.seed, name)

    def mazes(self, tasks: list[TaskId]) -> dict[TaskId, Maze]:
        missing = [t for t in tasks if t not in self._mazes]
        if missing:
            self._mazes.update(
                task_mazes(
                    self.maze,
                    missing,
                    self.settings.left_arm_block,
                    self.settings.right_arm_block,
                )
            )
        return {t: self._mazes[t] for t in tasks}

    def seed_dir(self, label: str) -> Path:
        return seed_dir(self.run_root / label, self.seed)

    def world_model(self) -> WorldModel:
        """The checkpoint named by WORLD_MODEL_DIR, or a model trained
        off-line on the DATASET_MODE dataset of WM_TASKS."""
        if self._world_model is not None:
            return self._world_model
        s = self.settings
        if s.world_model_dir is not None:
            self._world_model = WorldModel.load(s.world_model_dir)
            return self._world_model
        tasks = parse_tasks(s.wm_tasks)
        behavioral = s.dataset_mode == DatasetMode.BEHAVIORAL
        samples = collect_dataset(
            self.mazes(tasks),
            tasks,
            s.dataset_mode,
            encoding=s.encoding_config(),
            agent=s.agent_config(),
            rng=self.rng(StreamName.DATASET) if behavioral else None,
            q=self.new_q_bank() if behavioral else None,
            n_laps=s.behavioral_laps,
            log_prefix=self.log_prefix,
        )
        self._world_model = learn(
            samples,
            s.galmo_config(),
            self.rng(StreamName.GALMO),
            s.net_bundles(),
            s.reward_input,
            log_prefix=self.log_prefix,
        )
        self._world_model.save(self.seed_dir("world_model"))
        return self._world_model

    def new_q_bank(self) -> QBank:
        return QBank.create(STATE_DIM, self.rng(StreamName.NETS), self.settings.net_bundles())

    def run_agent(
        self,
        label: str,
        schedule: list[ScheduleEntry],
        config: AgentConfig,
        with_replays: bool,
    ) -> RunLog:
        """Runs a fresh agent over the schedule and writes its logs under
        <label>/seed_<k>/. Every label starts from the same Q initialisation
        and softmax stream."""
        model = self.world_model() if with_replays and config.replay_budget > 0 else None
        log = run_experiment(
            self.maze,
            schedule,
            config,
            self.new_q_bank(),
            self.rng(StreamName.SOFTMAX),
            model,
            with_replays=with_replays,
            encoding=self.settings.encoding_config(),
            mazes=self.mazes([entry.task for entry in schedule]),
            log_prefix=f"{self.log_prefix}[{label}] ",
        )
        run_dir = self.run_root / label
        write_trials(run_dir, self.seed, log.trials)
        write_replays(run_dir, self.seed, log.replay_events)
        write_csv(log.steps_frame(), self.seed_dir(label) / STEPS_FILE)
        logger.info(f"{self.log_prefix}Wrote {label} logs to '{self.seed_dir(label)}'.")
        return log
