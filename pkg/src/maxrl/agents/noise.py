"""Exploration noise for continuous-action agents.

``pink_ar1`` stands in for pink noise with a first-order autoregressive
process ``n_t = rho * n_{t-1} + sqrt(1 - rho**2) * eps_t``, which has unit
stationary variance and lag-1 autocorrelation ``rho``.
"""

from __future__ import annotations

import numpy as np

AR1_RHO = 0.9


class ExplorationNoise:
    def __init__(self, kind: str, dim: int, std: float, clip: float, rng: np.random.Generator,
                 rho: float = AR1_RHO):
        if kind not in ("gaussian", "pink_ar1"):
            raise ValueError(f"unknown noise kind {kind!r}")
        if std < 0:
            raise ValueError("noise std must be non-negative")
        self.kind, self.dim, self.std, self.clip = kind, dim, std, clip
        self.rng = rng
        self.rho = rho
        self.state = np.zeros(dim)
        self.reset()

    def reset(self):
        # start from the stationary distribution so every step has unit variance
        self.state = self.rng.standard_normal(self.dim)

    def sample(self) -> np.ndarray:
        eps = self.rng.standard_normal(self.dim)
        if self.kind == "pink_ar1":
            self.state = self.rho * self.state + np.sqrt(1.0 - self.rho**2) * eps
            n = self.state
        else:
            n = eps
        return np.clip(self.std * n, -self.clip, self.clip)


def exploration_noise(kind: str, std: float, clip: float, rng: np.random.Generator,
                      dim: int = 1) -> np.ndarray:
    """One-off perturbation vector; stateful users should hold an ``ExplorationNoise``."""
    return ExplorationNoise(kind, dim, std, clip, rng).sample()
