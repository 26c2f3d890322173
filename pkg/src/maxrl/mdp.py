"""Finite tabular MDPs and their extended max-reward counterparts.

The extended MDP augments each state ``s`` with ``y``, the inversely
discounted running maximum of the rewards collected so far.  Every step maps
``y -> max(r, y) / gamma`` and every episode starts at ``y = 0``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

log = logging.getLogger(__name__)

ROW_TOL = 1e-12
SUPPORT_TOL = 1e-12
Y_WARN = 1e12


@dataclass(frozen=True, eq=False)
class MdpSpec:
    transition: np.ndarray  # P[s, a, s']
    reward: np.ndarray  # R[s, a, s']
    gamma: float
    r_bar: float
    p0: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        R = np.asarray(self.reward, dtype=float)
        p0 = np.asarray(self.p0, dtype=float)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "r_bar", float(self.r_bar))
        for arr in (P, R, p0):
            arr.setflags(write=False)

        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {P.shape}")
        if R.shape != P.shape:
            raise ValueError(f"reward shape {R.shape} != transition shape {P.shape}")
        if p0.shape != (P.shape[0],):
            raise ValueError(f"p0 must have shape ({P.shape[0]},), got {p0.shape}")
        if np.any(P < 0) or np.max(np.abs(P.sum(axis=2) - 1.0)) > ROW_TOL:
            raise ValueError("transition rows must be probability vectors")
        if np.any(p0 < 0) or abs(p0.sum() - 1.0) > ROW_TOL:
            raise ValueError("p0 must be a probability vector")
        # gamma == 1 is admitted for tasks that end in zero-reward absorbing states
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if np.any(R < 0) or np.any(R > self.r_bar):
            raise ValueError("rewards must lie in [0, r_bar]")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def with_gamma(self, gamma: float) -> MdpSpec:
        return MdpSpec(self.transition, self.reward, gamma, self.r_bar, self.p0)

    def is_deterministic(self) -> bool:
        return bool(np.all((self.transition == 0) | (self.transition == 1)))

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "gamma": self.gamma,
            "r_bar": self.r_bar,
            "p0": self.p0.tolist(),
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> MdpSpec:
        mdp = cls(d["transition"], d["reward"], d["gamma"], d["r_bar"], d["p0"])
        if mdp.n_states != d["n_states"] or mdp.n_actions != d["n_actions"]:
            raise ValueError("n_states/n_actions disagree with the transition tensor")
        return mdp

    def save(self, path: str | Path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))

    @classmethod
    def load(cls, path: str | Path) -> MdpSpec:
        return cls.from_dict(yaml.safe_load(Path(path).read_text()))


@dataclass(frozen=True)
class ExtendedState:
    s: int
    y: float


@dataclass(frozen=True)
class ExtendedTransition:
    s: int
    y: float
    a: int
    r: float
    s_next: int
    y_next: float
    truncated: bool = False


def next_y(r: float, y: float, gamma: float) -> float:
    """Running-max update ``max(r, y) / gamma``."""
    y_next = max(r, y) / gamma
    if y_next > Y_WARN:
        warnings.warn(f"auxiliary variable y={y_next:.3g} exceeds {Y_WARN:g}", RuntimeWarning)
    return y_next


def sample_index(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; ties in the cumulative sum go to the lower index."""
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return int(np.searchsorted(cdf, u, side="right"))


def step_extended(mdp: MdpSpec, state: ExtendedState, a: int, rng: np.random.Generator):
    if not 0 <= state.s < mdp.n_states:
        raise ValueError(f"state id {state.s} out of range")
    if not 0 <= a < mdp.n_actions:
        raise ValueError(f"action id {a} out of range")
    s_next = sample_index(mdp.transition[state.s, a], rng)
    r = float(mdp.reward[state.s, a, s_next])
    return r, ExtendedState(s_next, next_y(r, state.y, mdp.gamma))


def initial_extended(mdp: MdpSpec, rng: np.random.Generator) -> ExtendedState:
    return ExtendedState(sample_index(mdp.p0, rng), 0.0)


def rollout(mdp: MdpSpec, policy, steps: int, rng: np.random.Generator) -> list[ExtendedTransition]:
    """Sample ``steps`` extended transitions; ``policy(s, y, rng) -> a``."""
    state = initial_extended(mdp, rng)
    out = []
    for t in range(steps):
        a = policy(state.s, state.y, rng)
        r, nxt = step_extended(mdp, state, a, rng)
        out.append(ExtendedTransition(state.s, state.y, a, r, nxt.s, nxt.y, t == steps - 1))
        state = nxt
    return out


def distinct_rewards(mdp: MdpSpec) -> np.ndarray:
    """Distinct reward values reachable with positive probability."""
    vals = mdp.reward[mdp.transition > 0]
    return np.unique(vals)


def dedup_sorted(values, tol: float = SUPPORT_TOL) -> list[float]:
    out: list[float] = []
    for v in sorted(values):
        if not out or v - out[-1] > tol * max(1.0, abs(v)):
            out.append(float(v))
    return out


def reachable_y_support(mdp: MdpSpec, horizon: int) -> list[float]:
    """Finite set of y values an extended trajectory can visit within ``horizon`` steps.

    Values at or above ``r_bar`` are collapsed into ``r_bar``: the max-reward
    return never exceeds ``r_bar``, so every value function equals ``y`` there.
    """
    vals = {0.0, mdp.r_bar}
    if horizon > 0:
        for r in distinct_rewards(mdp):
            if r <= 0:
                continue
            for k in range(horizon + 1):
                v = r * mdp.gamma ** (-k)
                if v >= mdp.r_bar - SUPPORT_TOL * mdp.r_bar:
                    break
                vals.add(float(v))
    return dedup_sorted(vals)


def random_mdp(
    rng: np.random.Generator,
    n_states: int,
    n_actions: int,
    gamma: float,
    *,
    deterministic: bool = False,
    n_reward_levels: int | None = 4,
    branching: int | None = None,
    r_bar: float = 1.0,
) -> MdpSpec:
    """Random MDP for property sweeps.

    Rewards are drawn from a small grid of levels so the y-support stays
    finite and small.  ``branching`` caps the number of successors per row.
    """
    S, A = n_states, n_actions
    P = np.zeros((S, A, S))
    for s in range(S):
        for a in range(A):
            if deterministic:
                P[s, a, rng.integers(S)] = 1.0
            else:
                k = S if branching is None else min(branching, S)
                succ = rng.choice(S, size=k, replace=False)
                w = rng.dirichlet(np.ones(k))
                P[s, a, succ] = w
                P[s, a] /= P[s, a].sum()
    if n_reward_levels is None:
        R = rng.uniform(0, r_bar, size=(S, A, S))
    else:
        levels = np.linspace(0.0, r_bar, n_reward_levels + 1)
        R = rng.choice(levels, size=(S, A, S))
    p0 = rng.dirichlet(np.ones(S))
    return MdpSpec(P, R, gamma, r_bar, p0)
