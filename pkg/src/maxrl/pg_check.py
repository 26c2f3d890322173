"""Exact checks of the max-reward policy-gradient formulas on a tiny MDP.

The extended chain over (s, y) is finite here, so every quantity is exact:
``J(theta)`` comes from on-policy evaluation at ``y = 0``, ``q`` from the
same fixed point, and the discounted visitation ``d`` from a linear solve over
the non-analytic extended states.  Formula gradients are compared in
direction with central finite differences of ``J``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import MdpSpec
from .neural import softmax
from .solvers import _dynamics, evaluate_extended, q_from_v

FD_STEP = 1e-5
EVAL_TOL = 1e-14


def pg_mdp(seed: int = 0, *, gamma: float = 0.5, action_independent_rewards: bool = False) -> MdpSpec:
    """Random 2-state, 2-action MDP with rewards in {0, 0.125, 0.25, 1} and full support.

    With ``gamma = 0.5`` a reward of 0.125 needs three steps to reach ``r_bar``,
    so the extended chain visits several y levels.  When
    ``action_independent_rewards`` is set, rewards depend on (s, s') only, which
    the deterministic check needs.
    """
    rng = np.random.default_rng(seed)
    S, A = 2, 2
    P = rng.dirichlet(np.ones(S), size=(S, A))
    levels = np.array([0.0, 0.125, 0.25, 1.0])
    if action_independent_rewards:
        R = np.broadcast_to(rng.choice(levels, size=(S, 1, S)), (S, A, S)).copy()
    else:
        R = rng.choice(levels, size=(S, A, S))
    return MdpSpec(P, R, gamma, 1.0, np.array([1.0, 0.0]))


def objective(mdp: MdpSpec, policy_sya: np.ndarray) -> float:
    """``J = sum_s p0(s) v(s, 0)`` for an extended (S, Y, A) policy."""
    v, _ = evaluate_extended(mdp, policy_sya, q=False, tol=EVAL_TOL)
    return float(mdp.p0 @ v.values[:, 0])


def visitation(mdp: MdpSpec, policy_sya: np.ndarray) -> np.ndarray:
    """Unnormalised discounted visitation ``d(s, y) = sum_t gamma**t P(s_t = s, y_t = y)``.

    Successors with ``y' >= r_bar`` are dropped: their value is ``y'`` for every
    policy, so they carry no gradient.
    """
    v, _ = evaluate_extended(mdp, policy_sya, q=False, tol=EVAL_TOL)
    dyn = _dynamics(mdp, v)
    S, Y = v.values.shape
    M = np.zeros((S * Y, S * Y))
    for s in range(S):
        for iy in range(Y):
            for a in range(mdp.n_actions):
                for t in range(S):
                    p = policy_sya[s, iy, a] * mdp.transition[s, a, t]
                    if p == 0.0 or dyn.analytic[s, a, t, iy]:
                        continue
                    M[s * Y + iy, t * Y + dyn.idx[s, a, t, iy]] += p
    start = np.zeros(S * Y)
    start[np.arange(S) * Y] = mdp.p0
    d = np.linalg.solve(np.eye(S * Y) - mdp.gamma * M.T, start)
    return d.reshape(S, Y)


def extended_q(mdp: MdpSpec, policy_sya: np.ndarray) -> np.ndarray:
    v, _ = evaluate_extended(mdp, policy_sya, q=False, tol=EVAL_TOL)
    return q_from_v(v, mdp).values  # (S, A, Y)


def central_differences(f, theta: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    grad = np.zeros_like(theta)
    flat, g = theta.ravel(), grad.ravel()
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f(theta)
        flat[i] = old - h
        down = f(theta)
        flat[i] = old
        g[i] = (up - down) / (2.0 * h)
    return grad


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 and nb == 0.0:
        return 1.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a.ravel() @ b.ravel() / (na * nb))


# -- stochastic policies ---------------------------------------------------------

def softmax_policy(theta: np.ndarray) -> np.ndarray:
    return softmax(theta)


def stochastic_pg(mdp: MdpSpec, theta: np.ndarray) -> np.ndarray:
    """``sum_{s,y} d(s,y) sum_a grad pi(a|s,y) q(s,a,y)`` for a tabular softmax ``theta[s, y, a]``."""
    pi = softmax_policy(theta)
    d = visitation(mdp, pi)
    q = np.transpose(extended_q(mdp, pi), (0, 2, 1))  # (S, Y, A)
    baseline = np.sum(pi * q, axis=2, keepdims=True)
    return d[..., None] * pi * (q - baseline)


def stochastic_fd(mdp: MdpSpec, theta: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    return central_differences(lambda t: objective(mdp, softmax_policy(t)), theta.copy(), h)


# -- deterministic policies ------------------------------------------------------

def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def embedded_policy(mu: np.ndarray) -> np.ndarray:
    """Action ``a = mu(s, y)`` mixes the two kernels as ``sigma(a) P1 + (1 - sigma(a)) P0``.

    Rewards depend on (s, s') only, so this equals the stochastic policy that
    picks action 1 with probability ``sigma(a)``.
    """
    p1 = sigmoid(mu)
    return np.stack([1.0 - p1, p1], axis=-1)


def deterministic_pg(mdp: MdpSpec, mu: np.ndarray) -> np.ndarray:
    """``sum_{s,y} d(s,y) grad mu(s,y) dq/da`` with ``mu[s, y] = theta[s, y]``."""
    pi = embedded_policy(mu)
    d = visitation(mdp, pi)
    q = extended_q(mdp, pi)  # (S, A, Y); q(s, a, y) is linear in sigma(a)
    s = sigmoid(mu)
    dq_da = s * (1.0 - s) * (q[:, 1, :] - q[:, 0, :])
    return d * dq_da


def deterministic_fd(mdp: MdpSpec, mu: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    return central_differences(lambda m: objective(mdp, embedded_policy(m)), mu.copy(), h)


# -- suites ----------------------------------------------------------------------

@dataclass
class PgCheckResult:
    kind: str
    cosines: list
    threshold: float

    @property
    def failures(self) -> list[int]:
        return [i for i, c in enumerate(self.cosines) if not c >= self.threshold]

    @property
    def passed(self) -> bool:
        return not self.failures


def _n_y(mdp: MdpSpec) -> int:
    from .solvers import y_axis

    return y_axis(mdp).size


def run_stochastic_check(n_draws: int = 20, seed: int = 0, threshold: float = 0.999,
                         scale: float = 1.0) -> PgCheckResult:
    mdp = pg_mdp(seed)
    rng = np.random.default_rng(seed)
    shape = (mdp.n_states, _n_y(mdp), mdp.n_actions)
    cos = []
    for _ in range(n_draws):
        theta = scale * rng.standard_normal(shape)
        cos.append(cosine(stochastic_pg(mdp, theta), stochastic_fd(mdp, theta)))
    return PgCheckResult("stochastic", cos, threshold)


def run_deterministic_check(n_draws: int = 20, seed: int = 0, threshold: float = 0.99,
                            scale: float = 1.0) -> PgCheckResult:
    mdp = pg_mdp(seed, action_independent_rewards=True)
    rng = np.random.default_rng(seed + 1)
    shape = (mdp.n_states, _n_y(mdp))
    cos = []
    for _ in range(n_draws):
        mu = scale * rng.standard_normal(shape)
        cos.append(cosine(deterministic_pg(mdp, mu), deterministic_fd(mdp, mu)))
    return PgCheckResult("deterministic", cos, threshold)
