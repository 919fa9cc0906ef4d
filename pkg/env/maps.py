"""GridWorld layouts and the plain-text map format.

Map files hold one row per line: ``.`` floor, ``#`` wall, ``S`` start,
``G`` goal. Blank lines and lines starting with ``;`` are ignored.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from core.config import EnvSection, Layout
from core.errors import ConfigError, MapFormatError, NoPathError
from env.gridworld import DEFAULT_MAX_STEPS, Cell, GridWorld

MAX_RESAMPLES = 1000


def open_grid(width: int, height: int, max_steps: int = DEFAULT_MAX_STEPS) -> GridWorld:
    return GridWorld(width, height, (), (0, 0), (width - 1, height - 1), max_steps)


def four_rooms(width: int, height: int, max_steps: int = DEFAULT_MAX_STEPS) -> GridWorld:
    """Cross-shaped wall through the middle with one doorway per wall segment."""
    if width < 5 or height < 5:
        raise ConfigError(f"four_rooms needs at least 5x5, got {width}x{height}")
    mid_x, mid_y = width // 2, height // 2
    doors = {
        (mid_x, mid_y // 2),
        (mid_x, (mid_y + height) // 2),
        (mid_x // 2, mid_y),
        ((mid_x + width) // 2, mid_y),
    }
    walls = {(mid_x, y) for y in range(height)} | {(x, mid_y) for x in range(width)}
    return GridWorld(width, height, walls - doors, (0, 0), (width - 1, height - 1), max_steps)


def random_walls(
    width: int,
    height: int,
    density: float,
    rng: np.random.Generator,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> GridWorld:
    """Independent walls with probability ``density``, resampled until solvable."""
    start: Cell = (0, 0)
    goal: Cell = (width - 1, height - 1)
    for _ in range(MAX_RESAMPLES):
        mask = rng.random((height, width)) < density
        walls = {
            (x, y)
            for y in range(height)
            for x in range(width)
            if mask[y, x] and (x, y) not in (start, goal)
        }
        try:
            return GridWorld(width, height, walls, start, goal, max_steps)
        except NoPathError:
            continue
    raise NoPathError(
        f"no solvable {width}x{height} map at density {density} after {MAX_RESAMPLES} draws"
    )


def parse_map(text: str, max_steps: int = DEFAULT_MAX_STEPS, source: str = "<map>") -> GridWorld:
    rows = [
        line.rstrip("\n\r")
        for line in text.splitlines()
        if line.strip() and not line.lstrip().startswith(";")
    ]
    if not rows:
        raise MapFormatError(f"{source}: empty map")
    width = len(rows[0])
    walls: set[Cell] = set()
    start: Cell | None = None
    goal: Cell | None = None
    for y, row in enumerate(rows):
        if len(row) != width:
            raise MapFormatError(f"{source}: row {y} has length {len(row)}, expected {width}")
        for x, ch in enumerate(row):
            if ch == "#":
                walls.add((x, y))
            elif ch == "S":
                if start is not None:
                    raise MapFormatError(f"{source}: more than one start cell")
                start = (x, y)
            elif ch == "G":
                if goal is not None:
                    raise MapFormatError(f"{source}: more than one goal cell")
                goal = (x, y)
            elif ch != ".":
                raise MapFormatError(f"{source}: unexpected character {ch!r} at ({x}, {y})")
    if start is None or goal is None:
        raise MapFormatError(f"{source}: map needs exactly one S and one G")
    try:
        return GridWorld(width, len(rows), walls, start, goal, max_steps)
    except (ValueError, NoPathError) as e:
        raise MapFormatError(f"{source}: {e}") from e


def load_map(path: Path, max_steps: int = DEFAULT_MAX_STEPS) -> GridWorld:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise MapFormatError(f"cannot read map {path}: {e}") from e
    return parse_map(text, max_steps=max_steps, source=str(path))


def dump_map(env: GridWorld, path: Path | None = None) -> str:
    """Render env in the map format, also writing it to path when given."""
    lines = []
    for y in range(env.height):
        row = []
        for x in range(env.width):
            cell = (x, y)
            if cell == env.start:
                row.append("S")
            elif cell == env.goal:
                row.append("G")
            elif cell in env.walls:
                row.append("#")
            else:
                row.append(".")
        lines.append("".join(row))
    text = "\n".join(lines) + "\n"
    if path is not None:
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            raise MapFormatError(f"cannot write map {path}: {e}") from e
    return text


def make_env(section: EnvSection) -> GridWorld:
    """Build the environment a config section describes."""
    return _layout(section).clone(one_hot=section.one_hot_position)


def _layout(section: EnvSection) -> GridWorld:
    if section.map_file is not None:
        return load_map(section.map_file, max_steps=section.max_steps)
    if section.layout is Layout.OPEN:
        return open_grid(section.width, section.height, section.max_steps)
    if section.layout is Layout.FOUR_ROOMS:
        return four_rooms(section.width, section.height, section.max_steps)
    rng = np.random.default_rng(section.map_seed)
    return random_walls(
        section.width, section.height, section.wall_density, rng, section.max_steps,
    )
