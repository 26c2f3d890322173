from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Batch:
    obs: np.ndarray
    y: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    obs_next: np.ndarray
    y_next: np.ndarray
    truncated: np.ndarray


class ReplayBuffer:
    """Ring buffer of extended transitions ``(s, y, a, r, s', y', truncated)``."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.y = np.zeros(capacity)
        self.action = np.zeros((capacity, action_dim))
        self.reward = np.zeros(capacity)
        self.obs_next = np.zeros((capacity, obs_dim))
        self.y_next = np.zeros(capacity)
        self.truncated = np.zeros(capacity, dtype=bool)
        self.inserted = 0

    def __len__(self):
        return min(self.inserted, self.capacity)

    def add(self, obs, y, action, reward, obs_next, y_next, truncated=False):
        k = self.inserted % self.capacity
        self.obs[k] = obs
        self.y[k] = y
        self.action[k] = action
        self.reward[k] = reward
        self.obs_next[k] = obs_next
        self.y_next[k] = y_next
        self.truncated[k] = truncated
        self.inserted += 1

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        """Uniform draw with replacement from the filled region."""
        if len(self) == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(len(self), size=n)
        return Batch(self.obs[idx], self.y[idx], self.action[idx], self.reward[idx],
                     self.obs_next[idx], self.y_next[idx], self.truncated[idx])
