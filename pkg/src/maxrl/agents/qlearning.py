from __future__ import annotations

import numpy as np

from .config import QLearningConfig


class TabularQLearner:
    """Epsilon-greedy tabular Q-learning on raw observations, no y component.

    ``target="max_det"`` uses the deterministic max-reward target
    ``r v gamma * max q(s')``; ``"cumulative"`` uses ``r + gamma * max q(s')``.
    """

    def __init__(self, n_actions: int, cfg: QLearningConfig, seed: int):
        self.cfg = cfg
        self.n_actions = n_actions
        self.table: dict[bytes, np.ndarray] = {}
        self.rng = np.random.default_rng([seed, 13])
        self.updates = 0

    def q(self, obs) -> np.ndarray:
        key = np.asarray(obs, dtype=float).tobytes()
        row = self.table.get(key)
        if row is None:
            row = self.table[key] = np.zeros(self.n_actions)
        return row

    def greedy(self, obs) -> int:
        return int(np.argmax(self.q(obs)))

    def act(self, obs) -> int:
        if self.rng.random() < self.cfg.epsilon:
            return int(self.rng.integers(self.n_actions))
        return self.greedy(obs)

    def update(self, obs, a: int, r: float, obs_next) -> float:
        g = self.cfg.gamma
        v = self.q(obs_next).max()
        z = max(r, g * v) if self.cfg.target == "max_det" else r + g * v
        row = self.q(obs)
        err = z - row[a]
        row[a] += self.cfg.lr * err
        self.updates += 1
        return float(err * err)
