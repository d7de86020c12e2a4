"""Deterministic epochal gridworld mazes.

Cells are ``(x, y)`` tuples, actions are the strings ``R U L D``. Bumping into
a wall or the boundary keeps the walker in place; the goal is absorbing and
pays its single reward on first arrival.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

from .interaction import Alphabets

Cell = tuple[int, int]

ACTIONS: tuple[str, ...] = ("R", "U", "L", "D")
MOVES: dict[str, Cell] = {"R": (1, 0), "U": (0, 1), "L": (-1, 0), "D": (0, -1)}

ENUMERATION_GUARD = 2**24


class EpochOverflowError(RuntimeError):
    """Stepped past the episode length without a reset."""


class EnumerationGuardError(ValueError):
    """Action-sequence space too large to enumerate."""


class MazeFormatError(ValueError):
    pass


@dataclass(frozen=True)
class GridMaze:
    width: int
    height: int
    start: Cell
    goal: Cell
    episode_length: int
    walls: frozenset[frozenset[Cell]] = frozenset()

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise MazeFormatError("width and height must be positive")
        if self.episode_length < 1:
            raise MazeFormatError("episode_length must be positive")
        for name in ("start", "goal"):
            if not self.in_bounds(getattr(self, name)):
                raise MazeFormatError(f"{name} {getattr(self, name)} is out of bounds")
        if self.start == self.goal:
            raise MazeFormatError("start and goal must differ")
        for wall in self.walls:
            a, b = tuple(wall)
            if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
                raise MazeFormatError(f"wall {sorted(wall)} does not join adjacent cells")

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    @property
    def cells(self) -> list[Cell]:
        return [(x, y) for y in range(self.height) for x in range(self.width)]

    def blocked(self, a: Cell, b: Cell) -> bool:
        return frozenset((a, b)) in self.walls


def make_walls(pairs: Iterable[Sequence[Sequence[int]]]) -> frozenset[frozenset[Cell]]:
    return frozenset(frozenset((tuple(a), tuple(b))) for a, b in pairs)


@dataclass(frozen=True)
class EnvState:
    cell: Cell
    step: int = 0
    actions: tuple[str, ...] = ()
    rewarded: bool = False


class EnvSpec:
    """Classical specification of a maze task: transitions, percepts and reward predicate."""

    def __init__(self, maze: GridMaze, name: str = "maze") -> None:
        self.maze = maze
        self.name = name
        cells = maze.cells
        self.alphabets = Alphabets(tuple(cells), ACTIONS)
        self._cell_index = {c: i for i, c in enumerate(cells)}
        self._table = {(c, a): self._move(c, a) for c in cells for a in ACTIONS}

    def __repr__(self) -> str:
        return f"EnvSpec({self.name!r}, M={self.M}, N={self.N})"

    def _move(self, cell: Cell, action: str) -> Cell:
        dx, dy = MOVES[action]
        target = (cell[0] + dx, cell[1] + dy)
        if not self.maze.in_bounds(target) or self.maze.blocked(cell, target):
            return cell
        return target

    @property
    def actions(self) -> tuple[str, ...]:
        return self.alphabets.actions

    @property
    def M(self) -> int:
        return self.maze.episode_length

    @property
    def N(self) -> int:
        return len(self.actions) ** self.M

    @property
    def start(self) -> Cell:
        return self.maze.start

    @property
    def goal(self) -> Cell:
        return self.maze.goal

    def transition(self, cell: Cell, action: str) -> Cell:
        if cell == self.maze.goal:
            return cell
        return self._table[(cell, action)]

    def percept_of(self, cell: Cell) -> Cell:
        return cell

    def reset(self) -> EnvState:
        return EnvState(self.maze.start)

    @cached_property
    def transition_array(self) -> np.ndarray:
        """``[cell_index, action_index] -> cell_index`` with the goal absorbing."""
        cells = self.maze.cells
        out = np.empty((len(cells), len(self.actions)), dtype=np.int64)
        for i, c in enumerate(cells):
            for j, a in enumerate(self.actions):
                out[i, j] = self._cell_index[self.transition(c, a)]
        return out

    @cached_property
    def reward_mask(self) -> np.ndarray:
        """Boolean Λ over all sequence ranks, built by a level-wise tree walk.

        Independent of :func:`env_step`; :func:`lambda_of_spec` is the replay route.
        """
        check_guard(self)
        A = len(self.actions)
        goal = self._cell_index[self.maze.goal]
        cells = np.array([self._cell_index[self.maze.start]], dtype=np.int64)
        for _ in range(self.M):
            cells = self.transition_array[np.repeat(cells, A), np.tile(np.arange(A), cells.size)]
        mask = cells == goal
        mask.setflags(write=False)
        return mask

    @property
    def k(self) -> int:
        return int(self.reward_mask.sum())


def check_guard(spec: EnvSpec) -> None:
    if spec.N > ENUMERATION_GUARD:
        raise EnumerationGuardError(f"|A|^M = {spec.N} exceeds the enumeration guard {ENUMERATION_GUARD}")


def env_step(state: EnvState, spec: EnvSpec, action: str) -> tuple[EnvState, Cell, int]:
    if state.step >= spec.M:
        raise EpochOverflowError(f"epoch already has {spec.M} steps; reset first")
    if action not in spec.actions:
        raise ValueError(f"unknown action {action!r}")
    cell = spec.transition(state.cell, action)
    reward = int(cell == spec.goal and not state.rewarded)
    new = EnvState(cell, state.step + 1, state.actions + (action,), state.rewarded or bool(reward))
    return new, spec.percept_of(cell), reward


def epoch_reset(state: EnvState, spec: EnvSpec) -> EnvState:
    return spec.reset()


def replay(spec: EnvSpec, seq: Sequence[str]) -> tuple[list[Cell], list[int]]:
    """Play `seq` from reset; returns the emitted percepts and rewards."""
    state = spec.reset()
    percepts, rewards = [], []
    for a in seq:
        state, s, r = env_step(state, spec, a)
        percepts.append(s)
        rewards.append(r)
    return percepts, rewards


def lambda_of_spec(spec: EnvSpec, seq: Sequence[str]) -> int:
    if len(seq) != spec.M:
        raise ValueError(f"sequence length {len(seq)} != episode length {spec.M}")
    _, rewards = replay(spec, seq)
    return int(any(rewards))


def sequence_to_index(seq: Sequence[str], actions: Sequence[str] = ACTIONS) -> int:
    """Base-|A| rank with the first action most significant."""
    pos = {a: i for i, a in enumerate(actions)}
    idx = 0
    for a in seq:
        idx = idx * len(actions) + pos[a]
    return idx


def index_to_sequence(idx: int, M: int, actions: Sequence[str] = ACTIONS) -> tuple[str, ...]:
    A = len(actions)
    out = []
    for _ in range(M):
        idx, r = divmod(idx, A)
        out.append(actions[r])
    return tuple(reversed(out))


def enumerate_rewarding(spec: EnvSpec) -> set[tuple[str, ...]]:
    check_guard(spec)
    return {index_to_sequence(int(i), spec.M, spec.actions) for i in np.flatnonzero(spec.reward_mask)}


def reference_maze() -> EnvSpec:
    """2x2 open grid, start (0,0), goal (1,1), two steps per epoch."""
    return EnvSpec(GridMaze(2, 2, (0, 0), (1, 1), 2), name="reference-2x2")


def make_corridor(length: int, episode_length: int) -> EnvSpec:
    return EnvSpec(
        GridMaze(length, 1, (0, 0), (length - 1, 0), episode_length),
        name=f"corridor-1x{length}-M{episode_length}",
    )


def make_low_connectivity_maze(m: int) -> EnvSpec:
    """Corridor of m+1 cells with M=m: only R^m is rewarded, density |A|^-m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return make_corridor(m + 1, m)


def maze_to_dict(spec: EnvSpec) -> dict:
    mz = spec.maze
    return {
        "name": spec.name,
        "width": mz.width,
        "height": mz.height,
        "start": list(mz.start),
        "goal": list(mz.goal),
        "episode_length": mz.episode_length,
        "walls": sorted([sorted([list(c) for c in w]) for w in mz.walls]),
    }


def maze_from_dict(data: dict) -> EnvSpec:
    missing = {"width", "height", "start", "goal", "episode_length"} - set(data)
    if missing:
        raise MazeFormatError(f"maze file missing fields: {', '.join(sorted(missing))}")
    try:
        maze = GridMaze(
            int(data["width"]),
            int(data["height"]),
            tuple(int(v) for v in data["start"]),
            tuple(int(v) for v in data["goal"]),
            int(data["episode_length"]),
            make_walls(data.get("walls") or []),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, MazeFormatError):
            raise
        raise MazeFormatError(f"malformed maze field: {exc}") from exc
    return EnvSpec(maze, name=str(data.get("name", "maze")))


def load_maze(path: str | Path) -> EnvSpec:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise MazeFormatError(f"{path}: expected a mapping at top level")
    data.setdefault("name", Path(path).stem)
    return maze_from_dict(data)


def dump_maze(spec: EnvSpec, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(maze_to_dict(spec), fh, sort_keys=False, default_flow_style=None)
