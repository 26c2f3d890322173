"""Cumulative and max-reward returns, and the max-reward lambda-return."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import ExtendedTransition


@dataclass
class Trajectory:
    transitions: list[ExtendedTransition] = field(default_factory=list)
    gamma: float = 0.99

    @property
    def rewards(self) -> list[float]:
        return [tr.r for tr in self.transitions]

    def check_chaining(self, tol: float = 1e-12) -> bool:
        for prev, cur in zip(self.transitions, self.transitions[1:]):
            if cur.y != prev.y_next:
                return False
        return all(
            abs(tr.y_next - max(tr.r, tr.y) / self.gamma) <= tol * max(1.0, tr.y_next)
            for tr in self.transitions
        )


def max_return(rewards, gamma: float) -> float:
    """``max_k gamma**k * rewards[k]``; 0 for an empty list."""
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        return 0.0
    return float(np.max(r * gamma ** np.arange(r.size)))


def cum_return(rewards, gamma: float) -> float:
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        return 0.0
    return float(np.sum(r * gamma ** np.arange(r.size)))


def lambda_max_return(values, gamma: float, lam: float) -> float:
    """Max-reward lambda-return from the critic values at ``t+1 .. T``.

    The n-step estimate is ``gamma**n * values[n-1]``.  Weights are
    ``(1-lam) * lam**(n-1)`` with the last horizon taking the residual
    ``lam**(N-1)`` so they sum to one.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    if n == 0:
        raise ValueError("need at least one value")
    steps = gamma ** np.arange(1, n + 1) * v
    w = (1.0 - lam) * lam ** np.arange(n)
    w[-1] = lam ** (n - 1)
    return float(np.dot(w, steps))


def lambda_max_returns(values_next: np.ndarray, gamma: float, lam: float) -> np.ndarray:
    """All ``G_t(lambda)`` of one episode at once.

    ``values_next[t]`` is the critic at ``(s_{t+1}, y_{t+1})``.  Uses
    ``G_t = gamma * ((1-lam) * V_{t+1} + lam * G_{t+1})`` with
    ``G_{T-1} = gamma * V_T``, which needs no reward terms since the
    rewards are carried by y.
    """
    v = np.asarray(values_next, dtype=float)
    out = np.empty_like(v)
    g = gamma * v[-1]
    out[-1] = g
    for t in range(v.size - 2, -1, -1):
        g = gamma * ((1.0 - lam) * v[t] + lam * g)
        out[t] = g
    return out


def advantages(trajectory: Trajectory, values, lam: float) -> np.ndarray:
    """``G_t(lambda) - v(s_t, y_t)`` for every step of ``trajectory``.

    ``values[t]`` is the critic at ``(s_t, y_t)`` for ``t = 0 .. T``; the last
    entry bootstraps the truncated tail.
    """
    v = np.asarray(values, dtype=float)
    if v.size != len(trajectory.transitions) + 1:
        raise ValueError(
            f"length mismatch: {len(trajectory.transitions)} transitions need "
            f"{len(trajectory.transitions) + 1} values, got {v.size}"
        )
    return lambda_max_returns(v[1:], trajectory.gamma, lam) - v[:-1]


def gae(rewards, values, values_next, gamma: float, lam: float) -> np.ndarray:
    """Standard truncated GAE advantages for the cumulative baselines."""
    r = np.asarray(rewards, dtype=float)
    delta = r + gamma * np.asarray(values_next) - np.asarray(values)
    adv = np.empty_like(delta)
    acc = 0.0
    for t in range(delta.size - 1, -1, -1):
        acc = delta[t] + gamma * lam * acc
        adv[t] = acc
    return adv
