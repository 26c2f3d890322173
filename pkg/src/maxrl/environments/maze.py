"""Grid mazes, BFS distances and the reward family used on them."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

WALL, FREE = "#", "."
GOAL, START = "G", "S"
UNREACHABLE = -1

# N, E, S, W as (drow, dcol)
MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))


@dataclass(frozen=True)
class MazeLayout:
    walls: np.ndarray  # bool, True where wall
    goal_cells: tuple[tuple[int, int], ...]
    start_cell: tuple[int, int]
    name: str = ""

    def __post_init__(self):
        w = self.walls
        if w.ndim != 2:
            raise ValueError("maze grid must be 2-D")
        if not (w[0].all() and w[-1].all() and w[:, 0].all() and w[:, -1].all()):
            raise ValueError("maze boundary must be wall")
        if not self.goal_cells:
            raise ValueError("maze needs at least one goal cell")
        for cell in (*self.goal_cells, self.start_cell):
            if w[cell]:
                raise ValueError(f"cell {cell} is a wall")

    @property
    def shape(self) -> tuple[int, int]:
        return self.walls.shape

    def is_free(self, cell) -> bool:
        i, j = cell
        n, m = self.walls.shape
        return 0 <= i < n and 0 <= j < m and not self.walls[i, j]

    def free_cells(self) -> list[tuple[int, int]]:
        return [tuple(c) for c in np.argwhere(~self.walls)]

    @classmethod
    def parse(cls, text: str, name: str = "") -> MazeLayout:
        rows = [ln.rstrip() for ln in text.strip("\n").splitlines() if ln.strip()]
        width = max(len(r) for r in rows)
        walls = np.ones((len(rows), width), dtype=bool)
        goals, start = [], None
        for i, row in enumerate(rows):
            for j, ch in enumerate(row):
                if ch == WALL:
                    continue
                if ch not in (FREE, GOAL, START):
                    raise ValueError(f"unknown maze character {ch!r} at ({i}, {j})")
                walls[i, j] = False
                if ch == GOAL:
                    goals.append((i, j))
                elif ch == START:
                    start = (i, j)
        if start is None:
            raise ValueError("maze has no start cell 'S'")
        return cls(walls, tuple(goals), start, name)

    def render(self) -> str:
        lines = []
        for i in range(self.walls.shape[0]):
            row = []
            for j in range(self.walls.shape[1]):
                if self.walls[i, j]:
                    row.append(WALL)
                elif (i, j) in self.goal_cells:
                    row.append(GOAL)
                elif (i, j) == self.start_cell:
                    row.append(START)
                else:
                    row.append(FREE)
            lines.append("".join(row))
        return "\n".join(lines) + "\n"


def load_layout(name_or_path: str) -> MazeLayout:
    """Load a shipped layout by name (``single_goal``) or an ASCII map file."""
    p = Path(name_or_path)
    if p.suffix == ".txt" and p.exists():
        return MazeLayout.parse(p.read_text(), p.stem)
    text = resources.files(__package__).joinpath("layouts", f"{name_or_path}.txt").read_text()
    return MazeLayout.parse(text, name_or_path)


def bfs_distance(layout: MazeLayout, goal) -> np.ndarray:
    """Number of 4-neighbour moves from each cell to ``goal``; ``UNREACHABLE`` elsewhere."""
    if layout.walls.all():
        raise ValueError("maze has no free cells")
    if not layout.is_free(goal):
        raise ValueError(f"goal {goal} is not a free cell")
    D = np.full(layout.shape, UNREACHABLE, dtype=int)
    D[goal] = 0
    queue = deque([tuple(goal)])
    while queue:
        i, j = queue.popleft()
        for di, dj in MOVES:
            nb = (i + di, j + dj)
            if layout.is_free(nb) and D[nb] == UNREACHABLE:
                D[nb] = D[i, j] + 1
                queue.append(nb)
    return D


def dsp_reward(D: np.ndarray, cell, k: int, beta: float, *, negative: bool = False) -> float:
    """Shortest-path surrogate: ``beta**(d+1)`` on cells whose distance is a multiple of k.

    The goal-entry override to 1 is applied by the environments, not here.
    """
    d = int(D[cell])
    if d == UNREACHABLE:
        r = 0.0
    else:
        r = beta ** (d + 1) if d % k == 0 else 0.0
    return r - 1.0 if negative else r


@dataclass(frozen=True)
class RewardKind:
    kind: str = "sparse"  # sparse | dense_l2 | dsp
    k: int = 1
    beta: float = 0.9
    negative: bool = False

    def __post_init__(self):
        if self.kind not in ("sparse", "dense_l2", "dsp"):
            raise ValueError(f"unknown reward kind {self.kind!r}")
        if self.kind == "dsp":
            if self.k < 1:
                raise ValueError("dsp k must be >= 1")
            if not 0.0 < self.beta < 1.0:
                raise ValueError("dsp beta must lie in (0, 1)")

    @property
    def bounds(self) -> tuple[float, float]:
        return (-1.0, 0.0) if self.negative else (0.0, 1.0)


class CellRewards:
    """Per-goal lookup table of destination-cell rewards."""

    def __init__(self, layout: MazeLayout, reward: RewardKind):
        self.layout = layout
        self.reward = reward
        self.tables = []
        n, m = layout.shape
        for goal in layout.goal_cells:
            tab = np.zeros(layout.shape)
            if reward.kind == "dsp":
                D = bfs_distance(layout, goal)
                for i in range(n):
                    for j in range(m):
                        if not layout.walls[i, j]:
                            tab[i, j] = dsp_reward(D, (i, j), reward.k, reward.beta)
            elif reward.kind == "dense_l2":
                ii, jj = np.indices(layout.shape)
                tab = np.exp(-np.hypot(ii - goal[0], jj - goal[1]))
            tab[goal] = 1.0
            tab[layout.walls] = 0.0
            if reward.negative:
                tab = tab - 1.0
            self.tables.append(tab)

    def __call__(self, goal_idx: int, cell) -> float:
        return float(self.tables[goal_idx][cell])
