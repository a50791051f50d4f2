from __future__ import annotations
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
import numpy as np
from pydantic import BaseModel
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from src.core.enums import ACTIONS, Action, PlaceKernel, Side, TaskId, Zone
from src.core.exceptions import InvalidActionError, MazeError
from src.core.logger import logger
from src.core.models import EncodingConfig

N_PLACE = 32
STATE_DIM = N_PLACE + 2
MEMORY_LEVELS = (0.0, 0.5, 1.0)

WALL = "#"
OPEN_CHARS = {".", "S", "L", "R", "1", "2"}
ZONE_CHARS = {zone.value: zone for zone in Zone}

StateVector = np.ndarray  # shape (STATE_DIM,): place activities, then L, R


@dataclass(frozen=True, eq=False)
class Maze:
    shape: tuple[int, int]
    cells: tuple[tuple[int, int], ...]
    # neighbor id per action, in ACTIONS order, ignoring blocking
    links: tuple[tuple[int | None, ...], ...]
    reward_sites: dict[Side, int]
    start_cell: int
    junctions: dict[str, int]
    zones: tuple[Zone, ...]
    blocked: frozenset[int] = frozenset()

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def t1(self) -> int:
        return self.junctions["T1"]

    @property
    def t2(self) -> int:
        return self.junctions["T2"]

    def is_open(self, cell: int) -> bool:
        return 0 <= cell < self.n_cells and cell not in self.blocked

    def neighbor(self, cell: int, action: Action) -> int | None:
        if not self.is_open(cell):
            return None
        target = self.links[cell][ACTIONS.index(action)]
        if target is None or target in self.blocked:
            return None
        return target

    def neighbors(self, cell: int) -> list[int]:
        return [n for a in ACTIONS if (n := self.neighbor(cell, a)) is not None]

    def are_adjacent(self, a: int, b: int) -> bool:
        """Adjacency of the unblocked layout."""
        return b in self.links[a]

    def side_of_site(self, cell: int) -> Side:
        for side, site in self.reward_sites.items():
            if site == cell:
                return side
        return Side.NONE

    def _geodesic(self, pairs: list[tuple[int, int]]) -> np.ndarray:
        rows = [a for a, _ in pairs]
        cols = [b for _, b in pairs]
        graph = csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(self.n_cells, self.n_cells)
        )
        return shortest_path(csgraph=graph, directed=False, unweighted=True)

    @cached_property
    def distances(self) -> np.ndarray:
        """Shortest open-path distances; inf when unreachable."""
        return self._geodesic(
            [(cell, target) for cell in range(self.n_cells) for target in self.neighbors(cell)]
        )

    def reachable_from(self, cell: int) -> set[int]:
        return {int(i) for i in np.flatnonzero(np.isfinite(self.distances[cell]))}

    @cached_property
    def forward_edges(self) -> frozenset[tuple[int, int]]:
        return lap_edges(self)


class RewardMemory(BaseModel):
    last: Side = Side.NONE
    penultimate: Side = Side.NONE

    model_config = {"frozen": True}

    @property
    def left(self) -> float:
        return _memory_level(Side.LEFT, self.last, self.penultimate)

    @property
    def right(self) -> float:
        return _memory_level(Side.RIGHT, self.last, self.penultimate)

    @property
    def pair(self) -> tuple[float, float]:
        return (self.left, self.right)


def _memory_level(side: Side, last: Side, penultimate: Side) -> float:
    if last == side:
        return 1.0
    if penultimate == side:
        return 0.5
    return 0.0


def update_memory(memory: RewardMemory, rewarded_side: Side) -> RewardMemory:
    """Shifts the reward history on rewarded events only."""
    if rewarded_side == Side.NONE:
        return memory
    return RewardMemory(last=rewarded_side, penultimate=memory.last)


def rewarded_sides(task: TaskId, memory: RewardMemory) -> frozenset[Side]:
    if task in (TaskId.RIGHT_LEFT_BLOCKED, TaskId.RIGHT):
        return frozenset({Side.RIGHT})
    if task in (TaskId.LEFT_RIGHT_BLOCKED, TaskId.LEFT):
        return frozenset({Side.LEFT})
    # Alternation: before any reward, either side seeds the sequence.
    if memory.last == Side.NONE:
        return frozenset({Side.LEFT, Side.RIGHT})
    return frozenset({memory.last.opposite})


def _split_blocks(lines: list[str]) -> list[list[str]]:
    blocks: list[list[str]] = []
    current: list[str] = []
    for line in lines:
        if line.startswith("%"):
            continue
        if not line.strip():
            if current:
                blocks.append(current)
                current = []
            continue
        current.append(line.rstrip("\r\n"))
    if current:
        blocks.append(current)
    return blocks


def load_maze(path: Path | str) -> Maze:
    """Parses an ASCII maze file: a layout grid, optionally followed
    (after a blank line) by a zone grid of the same shape."""
    path = Path(path)
    logger.info(f"Loading maze from '{path}'...")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise MazeError(f"Cannot read maze file '{path}': {e}") from e
    blocks = _split_blocks(text.splitlines())
    if not blocks:
        raise MazeError(f"Maze file '{path}' contains no layout grid.")
    layout = blocks[0]
    width = len(layout[0])
    if any(len(row) != width for row in layout):
        raise MazeError(f"Maze file '{path}': layout lines have unequal lengths.")

    cells: list[tuple[int, int]] = []
    markers: dict[str, list[int]] = {}
    for r, row in enumerate(layout):
        for c, char in enumerate(row):
            if char == WALL:
                continue
            if char not in OPEN_CHARS:
                raise MazeError(
                    f"Maze file '{path}': unexpected character '{char}' at ({r},{c})."
                )
            markers.setdefault(char, []).append(len(cells))
            cells.append((r, c))
    if len(cells) != N_PLACE:
        raise MazeError(
            f"Maze file '{path}' has {len(cells)} open cells, expected {N_PLACE}."
        )
    for marker in ("S", "L", "R", "1", "2"):
        if len(markers.get(marker, [])) != 1:
            raise MazeError(
                f"Maze file '{path}' must contain exactly one '{marker}' marker."
            )

    index = {coord: i for i, coord in enumerate(cells)}
    links: list[tuple[int | None, ...]] = []
    for r, c in cells:
        links.append(
            tuple(index.get((r + a.delta[0], c + a.delta[1])) for a in ACTIONS)
        )

    zones = _parse_zones(path, blocks[1] if len(blocks) > 1 else None, layout, cells)
    maze = Maze(
        shape=(len(layout), width),
        cells=tuple(cells),
        links=tuple(links),
        reward_sites={Side.LEFT: markers["L"][0], Side.RIGHT: markers["R"][0]},
        start_cell=markers["S"][0],
        junctions={"T1": markers["1"][0], "T2": markers["2"][0]},
        zones=zones,
    )
    _validate(maze, str(path))
    logger.info(f"Successfully loaded maze '{path.name}' with {maze.n_cells} cells.")
    return maze


def _parse_zones(
    path: Path, block: list[str] | None, layout: list[str], cells: list[tuple[int, int]]
) -> tuple[Zone, ...]:
    if block is None:
        logger.warning(f"Maze file '{path}' has no zone grid, all cells are central.")
        return tuple(Zone.CENTRAL for _ in cells)
    if len(block) != len(layout) or any(len(row) != len(layout[0]) for row in block):
        raise MazeError(f"Maze file '{path}': zone grid shape differs from layout.")
    zones: list[Zone] = []
    for r, c in cells:
        char = block[r][c]
        if char not in ZONE_CHARS:
            raise MazeError(
                f"Maze file '{path}': open cell ({r},{c}) has zone '{char}', "
                f"expected one of {', '.join(ZONE_CHARS)}."
            )
        zones.append(ZONE_CHARS[char])
    return tuple(zones)


def _validate(maze: Maze, label: str) -> None:
    for cell in range(maze.n_cells):
        if maze.is_open(cell) and len(maze.neighbors(cell)) < 2:
            r, c = maze.cells[cell]
            raise MazeError(
                f"Maze '{label}': cell ({r},{c}) is a dead end, the agent could "
                "not move forward from it."
            )
    reachable = maze.reachable_from(maze.start_cell)
    for name, junction in maze.junctions.items():
        if junction not in reachable:
            raise MazeError(f"Maze '{label}': junction {name} is unreachable.")
    for side, site in maze.reward_sites.items():
        if site not in maze.blocked and site not in reachable:
            raise MazeError(f"Maze '{label}': {side} reward site is unreachable.")
    if not any(site in reachable for site in maze.reward_sites.values()):
        raise MazeError(f"Maze '{label}': no reward site is reachable.")


def parse_cell_list(maze: Maze, text: str) -> frozenset[int]:
    """Parses 'r,c;r,c' coordinates into cell ids."""
    index = {coord: i for i, coord in enumerate(maze.cells)}
    cells: set[int] = set()
    for part in text.split(";"):
        if not part.strip():
            continue
        try:
            r_str, c_str = part.split(",")
            coord = (int(r_str), int(c_str))
        except ValueError as e:
            raise MazeError(f"Invalid cell coordinate '{part}': {e}") from e
        if coord not in index:
            raise MazeError(f"Coordinate {coord} is not an open maze cell.")
        cells.add(index[coord])
    return frozenset(cells)


def blocked_cells_for(
    maze: Maze, task: TaskId, left_block: str = "", right_block: str = ""
) -> frozenset[int]:
    """Cells removed for a task: the whole opposite zone unless a
    coordinate list overrides it."""
    if task == TaskId.RIGHT_LEFT_BLOCKED:
        if left_block:
            return parse_cell_list(maze, left_block)
        return frozenset(i for i, z in enumerate(maze.zones) if z == Zone.LEFT)
    if task == TaskId.LEFT_RIGHT_BLOCKED:
        if right_block:
            return parse_cell_list(maze, right_block)
        return frozenset(i for i, z in enumerate(maze.zones) if z == Zone.RIGHT)
    return frozenset()


def with_blocking(maze: Maze, cells: frozenset[int]) -> Maze:
    if cells == maze.blocked:
        return maze
    protected = {maze.start_cell, *maze.junctions.values()}
    if cells & protected:
        raise MazeError("Blocking may not remove the start cell or a junction.")
    blocked = replace(maze, blocked=frozenset(cells))
    _validate(blocked, f"blocked({len(cells)} cells)")
    return blocked


def _kernel(distance: np.ndarray, encoding: EncodingConfig) -> np.ndarray:
    radius = encoding.radius
    if encoding.kernel == PlaceKernel.LINEAR:
        activity = np.maximum(0.0, (radius - distance) / radius)
    else:
        sigma = radius / 2.0
        activity = np.exp(-(distance**2) / (2.0 * sigma**2))
        activity[distance > radius] = 0.0
    activity[~np.isfinite(distance)] = 0.0
    return activity


def encode_state(
    maze: Maze,
    agent_cell: int,
    memory: RewardMemory,
    encoding: EncodingConfig = EncodingConfig(),
) -> StateVector:
    """Place-cell activities over open-path geodesic distance plus the L/R memory."""
    if not maze.is_open(agent_cell):
        raise MazeError(f"Cannot encode agent cell {agent_cell}: blocked or out of range.")
    state = np.empty(STATE_DIM)
    state[:N_PLACE] = _kernel(maze.distances[agent_cell].copy(), encoding)
    state[N_PLACE] = memory.left
    state[N_PLACE + 1] = memory.right
    return state


def valid_actions(maze: Maze, agent_cell: int, prev_cell: int | None) -> tuple[Action, ...]:
    """Open moves that follow the lap orientation; corridors are one-way,
    so a lap always passes T1, the stem and T2 before a reward site."""
    return tuple(
        action
        for action in ACTIONS
        if (target := maze.neighbor(agent_cell, action)) is not None
        and target != prev_cell
        and (agent_cell, target) in maze.forward_edges
    )


def step(
    maze: Maze,
    task: TaskId,
    agent_cell: int,
    prev_cell: int | None,
    action: Action,
    memory: RewardMemory,
    reward_magnitude: float = 0.8,
) -> tuple[int, float, Side]:
    if action not in valid_actions(maze, agent_cell, prev_cell):
        raise InvalidActionError(
            f"Action {action} from cell {agent_cell} (previous {prev_cell}) hits a "
            "wall or runs backward."
        )
    next_cell = maze.neighbor(agent_cell, action)
    assert next_cell is not None
    side = maze.side_of_site(next_cell)
    if side != Side.NONE and side in rewarded_sides(task, memory):
        return next_cell, reward_magnitude, side
    return next_cell, 0.0, Side.NONE


def decode_position(state: StateVector, floor: float = 0.0) -> int | None:
    """Argmax place cell (lowest id on ties); None for a null state."""
    place = np.asarray(state[:N_PLACE])
    if place.max() <= floor:
        return None
    return int(np.argmax(place))


def decode_memory(state: StateVector) -> tuple[float, float]:
    """Nearest memory levels of the L and R components."""
    levels = np.asarray(MEMORY_LEVELS)
    left = levels[np.argmin(np.abs(levels - state[N_PLACE]))]
    right = levels[np.argmin(np.abs(levels - state[N_PLACE + 1]))]
    return (float(left), float(right))


def state_key(state: StateVector) -> bytes:
    return np.asarray(state, dtype=np.float64).tobytes()


def lap_edges(maze: Maze) -> frozenset[tuple[int, int]]:
    """Directed edges of the usual lap: up the stem from T1 to T2, out
    along either side, back down the return corridor to T1."""
    base = with_blocking(maze, frozenset()) if maze.blocked else maze
    edges: set[tuple[int, int]] = set()
    t1, t2 = base.t1, base.t2

    def walk(prev: int, cell: int, stop: int) -> list[int]:
        path = [prev, cell]
        while cell != stop:
            onward = [n for n in base.neighbors(cell) if n != prev]
            if len(onward) != 1:
                raise MazeError(
                    f"Lap walk reached junction-like cell {cell} before {stop}; "
                    "the layout is not a double T-maze."
                )
            prev, cell = cell, onward[0]
            path.append(cell)
            if len(path) > base.n_cells + 1:
                raise MazeError("Lap walk does not terminate.")
        return path

    stem_entry = [n for n in base.neighbors(t1) if base.zones[n] == Zone.CENTRAL]
    if len(stem_entry) != 1:
        raise MazeError("T1 must have exactly one central neighbor (the stem).")
    stem = walk(t1, stem_entry[0], t2)
    edges.update(zip(stem, stem[1:]))
    for arm in base.neighbors(t2):
        if arm == stem[-2]:
            continue
        lap = walk(t2, arm, t1)
        edges.update(zip(lap, lap[1:]))
    return frozenset(edges)
