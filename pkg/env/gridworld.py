"""Deterministic GridWorld with an exact shortest-path teacher.

Cells are (x, y) with x the column and y the row, row 0 at the top.
Moving into a wall or off the grid leaves the agent in place. The only
reward is 1.0 on entering the goal, which ends the episode; an episode
also ends when ``max_steps`` moves have been made.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from core.errors import EpisodeFinishedError, NoPathError

Cell = tuple[int, int]

DEFAULT_MAX_STEPS = 100


class Action(IntEnum):
    # Order doubles as the teacher's tie-break order
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3


N_ACTIONS = len(Action)

_MOVES: dict[Action, Cell] = {
    Action.UP: (0, -1),
    Action.DOWN: (0, 1),
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
}

# Local occupancy window, row-major from the top-left neighbour
_WINDOW = [(dx, dy) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]


class StepResult(NamedTuple):
    state: np.ndarray
    reward: float
    terminal: bool


class GridWorld:
    """One GridWorld map plus the running episode on it."""

    def __init__(
        self,
        width: int,
        height: int,
        walls: Iterable[Cell],
        start: Cell,
        goal: Cell,
        max_steps: int = DEFAULT_MAX_STEPS,
        *,
        one_hot: bool = False,
    ) -> None:
        if width <= 0 or height <= 0:
            raise ValueError(f"grid dimensions must be positive, got {width}x{height}")
        if max_steps <= 0:
            raise ValueError(f"max_steps must be positive, got {max_steps}")
        self.width = width
        self.height = height
        self.walls = frozenset(walls)
        self.start = start
        self.goal = goal
        self.max_steps = max_steps
        self.one_hot = one_hot

        for name, cell in (("start", start), ("goal", goal)):
            if not self.in_bounds(cell):
                raise ValueError(f"{name} {cell} lies outside the {width}x{height} grid")
            if cell in self.walls:
                raise ValueError(f"{name} {cell} is a wall")
        if start == goal:
            raise ValueError("start and goal must differ")

        self._distances = self._distances_to_goal()
        if start not in self._distances:
            raise NoPathError(f"goal {goal} is unreachable from start {start}")

        self.position = start
        self.steps = 0
        self.done = False

    # -- geometry -----------------------------------------------------------

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.walls

    def neighbour(self, cell: Cell, action: Action) -> Cell:
        """Cell reached by taking action from cell (cell itself when blocked)."""
        dx, dy = _MOVES[Action(action)]
        target = (cell[0] + dx, cell[1] + dy)
        return target if self.is_free(target) else cell

    def _distances_to_goal(self) -> dict[Cell, int]:
        # Moves are reversible, so BFS outward from the goal gives every
        # cell's shortest distance to it.
        distances = {self.goal: 0}
        frontier = deque([self.goal])
        while frontier:
            cell = frontier.popleft()
            for action in Action:
                nxt = self.neighbour(cell, action)
                if nxt not in distances:
                    distances[nxt] = distances[cell] + 1
                    frontier.append(nxt)
        return distances

    def distance(self, cell: Cell) -> int:
        """Shortest number of moves from cell to the goal."""
        try:
            return self._distances[cell]
        except KeyError:
            raise NoPathError(f"no path from {cell} to goal {self.goal}") from None

    # -- observation --------------------------------------------------------

    @property
    def observation_size(self) -> int:
        cells = self.width * self.height if self.one_hot else 0
        return 2 + len(_WINDOW) + cells

    def encode(self, cell: Cell) -> np.ndarray:
        """(x, y) scaled to [0, 1] followed by the 3x3 wall/boundary window.

        With ``one_hot`` a width*height indicator of the cell (row-major) is
        appended, so no two cells share an encoding.
        """
        x, y = cell
        sx = x / (self.width - 1) if self.width > 1 else 0.0
        sy = y / (self.height - 1) if self.height > 1 else 0.0
        window = [0.0 if self.is_free((x + dx, y + dy)) else 1.0 for dx, dy in _WINDOW]
        obs = np.array([sx, sy, *window], dtype=np.float64)
        if not self.one_hot:
            return obs
        position = np.zeros(self.width * self.height)
        position[y * self.width + x] = 1.0
        return np.concatenate([obs, position])

    # -- episode ------------------------------------------------------------

    def reset(self) -> np.ndarray:
        self.position = self.start
        self.steps = 0
        self.done = False
        return self.encode(self.position)

    def step(self, action: int) -> StepResult:
        if self.done:
            raise EpisodeFinishedError("episode finished; call reset() first")
        self.position = self.neighbour(self.position, Action(action))
        self.steps += 1
        reached = self.position == self.goal
        self.done = reached or self.steps >= self.max_steps
        return StepResult(self.encode(self.position), 1.0 if reached else 0.0, self.done)

    # -- teacher ------------------------------------------------------------

    def teacher_action(self, cell: Cell | None = None) -> Action:
        """First move of a shortest path to the goal; ties go to the lowest action."""
        cell = self.position if cell is None else cell
        dist = self.distance(cell)
        for action in Action:
            nxt = self.neighbour(cell, action)
            if nxt != cell and self._distances.get(nxt) == dist - 1:
                return action
        raise NoPathError(f"{cell} is the goal; there is no next move")

    def clone(self, *, one_hot: bool | None = None) -> GridWorld:
        """Same map, fresh episode; ``one_hot`` switches the encoding."""
        return GridWorld(
            self.width, self.height, self.walls, self.start, self.goal, self.max_steps,
            one_hot=self.one_hot if one_hot is None else one_hot,
        )

    def reachable_cells(self) -> list[Cell]:
        return sorted(self._distances)
