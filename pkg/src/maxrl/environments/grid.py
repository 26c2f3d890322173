from __future__ import annotations

import numpy as np

from .core import Box, Discrete, Env
from .maze import MOVES, CellRewards, MazeLayout, RewardKind


class GridMazeEnv(Env):
    """Discrete maze with N/E/S/W moves; bumping into a wall leaves the agent in place.

    Rewards are paid by destination cell.  Observations are a one-hot over the
    free cells, followed by a one-hot of the active goal when the layout has
    more than one.
    """

    def __init__(self, layout: MazeLayout, reward: RewardKind, rng: np.random.Generator,
                 t_max: int = 300):
        self.layout = layout
        self.reward = reward
        self.rng = rng
        self.t_max = t_max
        self.rewards = CellRewards(layout, reward)
        self.r_min, self.r_bar = reward.bounds
        self.action_space = Discrete(4)
        self.cells = layout.free_cells()
        self.index = {c: k for k, c in enumerate(self.cells)}
        self.n_goals = len(layout.goal_cells)
        self.obs_dim = len(self.cells) + (self.n_goals if self.n_goals > 1 else 0)
        self.cell = layout.start_cell
        self.goal_idx = 0
        self.t = 0

    @property
    def goal(self):
        return self.layout.goal_cells[self.goal_idx]

    def _obs(self):
        o = np.zeros(self.obs_dim)
        o[self.index[self.cell]] = 1.0
        if self.n_goals > 1:
            o[len(self.cells) + self.goal_idx] = 1.0
        return o

    def reset(self):
        self.cell = self.layout.start_cell
        self.goal_idx = int(self.rng.integers(self.n_goals)) if self.n_goals > 1 else 0
        self.t = 0
        return self._obs()

    def move(self, cell, action: int):
        di, dj = MOVES[action]
        nxt = (cell[0] + di, cell[1] + dj)
        return nxt if self.layout.is_free(nxt) else cell

    def step(self, action):
        a = int(action)
        self.cell = self.move(self.cell, a)
        self.t += 1
        r = self.rewards(self.goal_idx, self.cell)
        info = {"success": self.cell == self.goal, "action": a}
        return self._obs(), r, self.t >= self.t_max, info


class PointMazeEnv(Env):
    """Point mass accelerated in 2-D inside a maze whose cells are unit squares.

    Positions are (x, y) = (column, row) coordinates.  Collisions are resolved
    one axis at a time: motion along a colliding axis is cancelled and that
    velocity component is zeroed.  Requires ``v_max * dt < 1`` so a step cannot
    jump over a wall cell.
    """

    def __init__(self, layout: MazeLayout, reward: RewardKind, rng: np.random.Generator,
                 dt: float = 0.5, a_max: float = 1.0, v_max: float = 1.0, t_max: int = 300):
        if v_max * dt >= 1.0:
            raise ValueError("v_max * dt must be < 1 cell")
        self.layout = layout
        self.reward = reward
        self.rng = rng
        self.dt, self.a_max, self.v_max = dt, a_max, v_max
        self.t_max = t_max
        self.rewards = CellRewards(layout, reward)
        self.r_min, self.r_bar = reward.bounds
        self.action_space = Box(-a_max, a_max, 2)
        self.n_goals = len(layout.goal_cells)
        self.obs_dim = 4 + (self.n_goals if self.n_goals > 1 else 0)
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)
        self.goal_idx = 0
        self.t = 0

    @property
    def goal(self):
        return self.layout.goal_cells[self.goal_idx]

    def cell_of(self, pos) -> tuple[int, int]:
        return int(np.floor(pos[1])), int(np.floor(pos[0]))

    def _obs(self):
        n, m = self.layout.shape
        o = [self.pos[0] / m, self.pos[1] / n, self.vel[0] / self.v_max, self.vel[1] / self.v_max]
        if self.n_goals > 1:
            g = np.zeros(self.n_goals)
            g[self.goal_idx] = 1.0
            o.extend(g)
        return np.array(o)

    def reset(self):
        i, j = self.layout.start_cell
        self.pos = np.array([j + 0.5, i + 0.5])
        self.vel = np.zeros(2)
        self.goal_idx = int(self.rng.integers(self.n_goals)) if self.n_goals > 1 else 0
        self.t = 0
        return self._obs()

    def step(self, action):
        a = np.clip(np.asarray(action, dtype=float), -self.a_max, self.a_max)
        self.vel = np.clip(self.vel + a * self.dt, -self.v_max, self.v_max)
        for axis in (0, 1):
            trial = self.pos.copy()
            trial[axis] += self.vel[axis] * self.dt
            if self.layout.is_free(self.cell_of(trial)):
                self.pos = trial
            else:
                self.vel[axis] = 0.0
        self.t += 1
        cell = self.cell_of(self.pos)
        r = self.rewards(self.goal_idx, cell)
        info = {"success": cell == self.goal, "action": a}
        return self._obs(), r, self.t >= self.t_max, info


class ReachEnv(Env):
    """1-D reach: move a point on [-1, 1] into a band around ``target``.

    Reward is 1 inside the band and ``exp(-4 * distance) / 2`` outside.
    """

    def __init__(self, rng: np.random.Generator, target: float = 0.7, tol: float = 0.1,
                 speed: float = 0.1, t_max: int = 50):
        self.rng = rng
        self.target, self.tol, self.speed = target, tol, speed
        self.t_max = t_max
        self.action_space = Box(-1.0, 1.0, 1)
        self.obs_dim = 1
        self.x = 0.0
        self.t = 0

    def reset(self):
        self.x = -0.5
        self.t = 0
        return np.array([self.x])

    def step(self, action):
        a = float(np.clip(np.asarray(action, dtype=float).reshape(-1)[0], -1.0, 1.0))
        self.x = float(np.clip(self.x + self.speed * a, -1.0, 1.0))
        self.t += 1
        hit = abs(self.x - self.target) <= self.tol
        r = 1.0 if hit else 0.5 * float(np.exp(-4.0 * abs(self.x - self.target)))
        return np.array([self.x]), r, self.t >= self.t_max, {"success": hit, "action": a}
