"""Small tabular MDPs: the five-state chain and the three-state counterexample."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mdp import MdpSpec

LEFT, STAY, RIGHT = 0, 1, 2
CHAIN_STATES = 5
CHAIN_GOAL = 4
CHAIN_INTERMEDIATE = 2


@dataclass(frozen=True)
class ChainConfig:
    x: float = 0.5
    gamma: float = 0.99

    def __post_init__(self):
        if not 0.0 < self.x < 1.0:
            raise ValueError(f"intermediate reward x must lie in (0, 1), got {self.x}")


def build_chain(cfg: ChainConfig) -> MdpSpec:
    """Five states in a row, actions left/stay/right, moves clipped at the ends.

    Entering s4 pays 1 and entering s2 pays ``x``; staying counts as entering.
    """
    n = CHAIN_STATES
    P = np.zeros((n, 3, n))
    R = np.zeros((n, 3, n))
    for s in range(n):
        for a, delta in ((LEFT, -1), (STAY, 0), (RIGHT, 1)):
            s2 = min(max(s + delta, 0), n - 1)
            P[s, a, s2] = 1.0
            if s2 == CHAIN_GOAL:
                R[s, a, s2] = 1.0
            elif s2 == CHAIN_INTERMEDIATE:
                R[s, a, s2] = cfg.x
    p0 = np.zeros(n)
    p0[0] = 1.0
    return MdpSpec(P, R, cfg.gamma, 1.0, p0)


def chain_optimal_actions() -> list[set[int]]:
    """Actions realising the optimal chain policy; at s4 "right" is clipped to "stay"."""
    return [{RIGHT}, {RIGHT}, {RIGHT}, {RIGHT}, {STAY, RIGHT}]


def chain_optimal_policy() -> np.ndarray:
    return np.array([RIGHT, RIGHT, RIGHT, RIGHT, STAY])


# three-state counterexample: s0 -> s1 (r=6), then s1 -> end with a random reward.
S0, S1, END_HI, END_LO = range(4)
A_PI1, A_PI2 = 0, 1


def build_three_state(gamma: float = 1.0):
    """Deterministic transitions, stochastic second reward.

    The two reward outcomes at s1 are encoded as two absorbing end states so
    that rewards stay a deterministic function of (s, a, s').  Returns the MDP
    and the two policies as (S, A) probability tables.
    """
    P = np.zeros((4, 2, 4))
    R = np.zeros((4, 2, 4))
    P[S0, :, S1] = 1.0
    R[S0, :, S1] = 6.0
    P[S1, A_PI1, [END_HI, END_LO]] = 0.5
    R[S1, A_PI1, END_HI] = 12.0
    R[S1, A_PI1, END_LO] = 0.0
    P[S1, A_PI2, [END_HI, END_LO]] = 0.5
    R[S1, A_PI2, END_HI] = 9.0
    R[S1, A_PI2, END_LO] = 7.0
    for end in (END_HI, END_LO):
        P[end, :, end] = 1.0
    p0 = np.array([1.0, 0.0, 0.0, 0.0])
    mdp = MdpSpec(P, R, gamma, 12.0, p0)

    pi1 = np.zeros((4, 2))
    pi1[:, A_PI1] = 1.0
    pi2 = pi1.copy()
    pi2[S1] = [0.0, 1.0]
    return mdp, pi1, pi2


def build_bandit(rewards=(0.2, 1.0), gamma: float = 0.99) -> MdpSpec:
    """One pull from state 0, then a zero-reward absorbing state 1."""
    k = len(rewards)
    P = np.zeros((2, k, 2))
    R = np.zeros((2, k, 2))
    P[0, :, 1] = 1.0
    R[0, :, 1] = rewards
    P[1, :, 1] = 1.0
    return MdpSpec(P, R, gamma, max(1.0, float(max(rewards))), np.array([1.0, 0.0]))
