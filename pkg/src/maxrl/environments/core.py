"""Steppable environment interface shared by the tabular, grid and continuous tasks.

``reset() -> obs`` and ``step(action) -> (obs, reward, truncated, info)``.
There are no terminal states; episodes only truncate at ``t_max``.  ``info``
carries ``success`` (goal reached on this step) and ``action`` (the action
actually executed, which differs from the requested one under slip).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mdp import MdpSpec, sample_index


@dataclass(frozen=True)
class Discrete:
    n: int

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.n))


@dataclass(frozen=True)
class Box:
    low: float
    high: float
    dim: int

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=self.dim)

    def clip(self, a) -> np.ndarray:
        return np.clip(np.asarray(a, dtype=float), self.low, self.high)


class Env:
    obs_dim: int
    action_space: Discrete | Box
    t_max: int
    r_min: float = 0.0
    r_bar: float = 1.0

    def reset(self) -> np.ndarray:
        raise NotImplementedError

    def step(self, action):
        raise NotImplementedError


class MdpEnv(Env):
    """Steps a tabular ``MdpSpec`` with one-hot observations.

    ``success_reward``: a step counts as success when its reward reaches this value.
    """

    def __init__(self, mdp: MdpSpec, rng: np.random.Generator, t_max: int = 100,
                 success_reward: float | None = None):
        self.mdp = mdp
        self.rng = rng
        self.t_max = t_max
        self.obs_dim = mdp.n_states
        self.action_space = Discrete(mdp.n_actions)
        self.r_bar = mdp.r_bar
        self.success_reward = float(mdp.reward.max()) if success_reward is None else success_reward
        self.s = 0
        self.t = 0

    def _obs(self):
        o = np.zeros(self.obs_dim)
        o[self.s] = 1.0
        return o

    def reset(self):
        self.s = sample_index(self.mdp.p0, self.rng)
        self.t = 0
        return self._obs()

    def step(self, action):
        a = int(action)
        s2 = sample_index(self.mdp.transition[self.s, a], self.rng)
        r = float(self.mdp.reward[self.s, a, s2])
        self.s = s2
        self.t += 1
        info = {"success": r >= self.success_reward, "action": a}
        return self._obs(), r, self.t >= self.t_max, info


class SlipWrapper(Env):
    """Replaces the requested action by a uniformly random one with probability ``p_slip``."""

    def __init__(self, env: Env, p_slip: float, rng: np.random.Generator):
        if not 0.0 <= p_slip <= 1.0:
            raise ValueError(f"p_slip must lie in [0, 1], got {p_slip}")
        self.env = env
        self.p_slip = p_slip
        self.rng = rng
        self.obs_dim = env.obs_dim
        self.action_space = env.action_space
        self.t_max = env.t_max
        self.r_min = env.r_min
        self.r_bar = env.r_bar

    def reset(self):
        return self.env.reset()

    def step(self, action):
        # draw unconditionally so the slip stream does not depend on the policy
        slip = self.rng.random() < self.p_slip
        replacement = self.action_space.sample(self.rng)
        return self.env.step(replacement if slip else action)

    def __getattr__(self, name):
        return getattr(self.env, name)
