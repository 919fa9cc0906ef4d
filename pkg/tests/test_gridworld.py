"""Tests for env.gridworld and env.maps."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from core.config import EnvSection, Layout
from core.errors import (
    ConfigError,
    EpisodeFinishedError,
    MapFormatError,
    NoPathError,
)
from env.gridworld import Action, GridWorld
from env.maps import (
    dump_map,
    four_rooms,
    load_map,
    make_env,
    open_grid,
    parse_map,
    random_walls,
)


class TestGridWorld:
    def test_reward_only_at_goal(self) -> None:
        env = GridWorld(2, 1, (), (0, 0), (1, 0))
        env.reset()
        result = env.step(Action.RIGHT)
        assert result.reward == 1.0
        assert result.terminal

    def test_walls_and_edges_block(self) -> None:
        env = GridWorld(3, 3, {(1, 0)}, (0, 0), (2, 2))
        env.reset()
        env.step(Action.RIGHT)
        assert env.position == (0, 0)
        env.step(Action.UP)
        assert env.position == (0, 0)

    def test_timeout_ends_episode(self) -> None:
        env = open_grid(5, 5, max_steps=3)
        env.reset()
        results = [env.step(Action.UP) for _ in range(3)]
        assert [r.terminal for r in results] == [False, False, True]
        assert all(r.reward == 0.0 for r in results)
        with pytest.raises(EpisodeFinishedError):
            env.step(Action.UP)

    def test_reset_restarts(self) -> None:
        env = open_grid(4, 4)
        env.reset()
        env.step(Action.DOWN)
        state = env.reset()
        assert env.position == env.start
        np.testing.assert_array_equal(state, env.encode(env.start))

    def test_encoding(self) -> None:
        env = GridWorld(3, 3, {(1, 0)}, (0, 0), (2, 2))
        obs = env.encode((0, 0))
        assert obs.shape == (env.observation_size,)
        assert obs[:2].tolist() == [0.0, 0.0]
        # Window row-major: top row off-grid, left column off-grid, (1, 0) is a wall
        window = obs[2:].reshape(3, 3)
        assert window[0].tolist() == [1.0, 1.0, 1.0]
        assert window[1].tolist() == [1.0, 0.0, 1.0]
        assert window[2].tolist() == [1.0, 0.0, 0.0]

    def test_one_hot_encoding_appends_cell_index(self) -> None:
        env = GridWorld(3, 3, {(1, 0)}, (0, 0), (2, 2), one_hot=True)
        assert env.observation_size == 11 + 9
        obs = env.encode((2, 1))
        np.testing.assert_array_equal(obs[:11], env.clone(one_hot=False).encode((2, 1)))
        assert obs[11:].tolist() == [0, 0, 0, 0, 0, 1, 0, 0, 0]

    def test_one_hot_cells_are_distinct(self) -> None:
        env = random_walls(10, 10, 0.2, np.random.default_rng(0)).clone(one_hot=True)
        codes = {env.encode(c).tobytes() for c in env.reachable_cells()}
        assert len(codes) == len(env.reachable_cells())

    def test_unreachable_goal(self) -> None:
        with pytest.raises(NoPathError):
            GridWorld(3, 1, {(1, 0)}, (0, 0), (2, 0))

    def test_start_on_wall(self) -> None:
        with pytest.raises(ValueError):
            GridWorld(3, 3, {(0, 0)}, (0, 0), (2, 2))


class TestTeacher:
    def test_teacher_is_optimal_on_random_maps(self) -> None:
        rng = np.random.default_rng(2024)
        for _ in range(25):
            env = random_walls(10, 10, 0.3, rng, max_steps=500)
            env.reset()
            steps = 0
            done = False
            reward = 0.0
            while not done:
                _, reward, done = env.step(env.teacher_action())
                steps += 1
            assert reward == 1.0
            assert steps == env.distance(env.start)

    def test_every_cell_moves_one_closer(self) -> None:
        env = four_rooms(9, 9)
        for cell in env.reachable_cells():
            if cell == env.goal:
                continue
            nxt = env.neighbour(cell, env.teacher_action(cell))
            assert env.distance(nxt) == env.distance(cell) - 1

    def test_tie_break_prefers_lowest_action(self) -> None:
        env = open_grid(3, 3)
        # Both DOWN and RIGHT are optimal from the start
        assert env.teacher_action((0, 0)) is Action.DOWN

    def test_no_move_at_goal(self) -> None:
        env = open_grid(3, 3)
        with pytest.raises(NoPathError):
            env.teacher_action(env.goal)


class TestMaps:
    def test_parse_and_dump(self, tmp_path: Path) -> None:
        text = "; test map\nS.#\n..#\n#.G\n"
        env = parse_map(text)
        assert env.start == (0, 0)
        assert env.goal == (2, 2)
        assert env.walls == {(2, 0), (2, 1), (0, 2)}
        path = tmp_path / "map.txt"
        dump_map(env, path)
        again = load_map(path)
        assert again.walls == env.walls
        assert (again.start, again.goal) == (env.start, env.goal)

    @pytest.mark.parametrize(
        "text",
        ["", "S.\n.\n", "S.G\n...\nG..\n", "S.x\n..G\n", "...\n..G\n", "S#.\n##G\n"],
    )
    def test_bad_maps(self, text: str) -> None:
        with pytest.raises(MapFormatError):
            parse_map(text)

    def test_four_rooms_too_small(self) -> None:
        with pytest.raises(ConfigError):
            four_rooms(4, 4)

    def test_random_walls_reproducible(self) -> None:
        a = random_walls(10, 10, 0.2, np.random.default_rng(5))
        b = random_walls(10, 10, 0.2, np.random.default_rng(5))
        assert a.walls == b.walls

    def test_make_env_layouts(self, tmp_path: Path) -> None:
        assert make_env(EnvSection(layout=Layout.OPEN, width=4, height=3)).walls == frozenset()
        assert make_env(EnvSection(layout=Layout.FOUR_ROOMS)).walls
        env = make_env(EnvSection())
        assert env.width == 10 and env.height == 10
        assert env.observation_size == 111
        assert make_env(EnvSection(one_hot_position=False)).observation_size == 11

        path = tmp_path / "m.txt"
        path.write_text("SG\n")
        assert make_env(EnvSection(map_file=path)).goal == (1, 0)
