"""Exact tabular solvers: Bellman operators, value iteration and oracles.

Three operator families act on value tables:

* cumulative ``E[r + gamma * max q']`` on (S, A) tables,
* the deterministic max-reward operator ``E[r v gamma * max q']`` on (S, A) tables,
* the max-reward operators on extended tables over (S, A, y), with
  ``y' = max(r, y) / gamma`` and ``T q(s, a, y) = gamma * E[y' v max q(s', ., y')]``.

Extended tables live on a finite y axis.  In ``exact`` mode the axis is the
closed reachable support, so every successor y' is either on the axis or at
or above ``r_bar``, where ``q(s, a, y') = y'`` holds analytically.  In
``grid`` mode the axis is uniform on ``[0, r_bar]`` and y' is interpolated.
"""

from __future__ import annotations

import csv
import logging
import math
import weakref
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .environments.tabular import (
    ChainConfig,
    build_chain,
    chain_optimal_actions,
    CHAIN_GOAL,
)
from .mdp import MdpSpec, distinct_rewards, reachable_y_support

log = logging.getLogger(__name__)

LOOKUP_RTOL = 1e-9
TIE_TOL = 1e-12
CAPPED = -1


@dataclass
class ExtendedTable:
    """Values over (S, A, Y) for q-tables or (S, Y) for v-tables."""

    values: np.ndarray
    ys: np.ndarray
    r_bar: float
    mode: str = "exact"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        if self.mode not in ("exact", "grid"):
            raise ValueError(f"unknown y-axis mode {self.mode!r}")
        if self.values.shape[-1] != self.ys.size:
            raise ValueError("last table axis must match the y axis")

    @property
    def is_q(self) -> bool:
        return self.values.ndim == 3

    def replace(self, values) -> ExtendedTable:
        return ExtendedTable(values, self.ys, self.r_bar, self.mode)

    def y_index(self, y: float) -> int:
        """Index of ``y`` on the axis (exact mode) or of the nearest grid point."""
        ys = self.ys
        k = int(np.argmin(np.abs(ys - min(y, self.r_bar))))
        if self.mode == "exact" and y < self.r_bar and not _close(ys[k], y):
            raise KeyError(f"y={y!r} is not on the support")
        return k

    def at(self, s: int, y: float, a: int | None = None) -> float:
        """Table value at an arbitrary y, using the analytic branch above ``r_bar``."""
        if y >= self.r_bar:
            return float(y)
        vals = self.values[s] if a is None else self.values[s, a]
        if self.mode == "exact":
            return float(vals[self.y_index(y)])
        return float(np.interp(y, self.ys, vals))


def _close(a, b):
    return abs(a - b) <= LOOKUP_RTOL * max(1.0, abs(b))


def support_horizon(mdp: MdpSpec) -> int:
    """Smallest horizon after which the reachable support is closed under the y update."""
    r = distinct_rewards(mdp)
    r = r[r > 0]
    if r.size == 0 or mdp.gamma == 1.0:
        return 1
    return int(math.ceil(math.log(r.min() / mdp.r_bar) / math.log(mdp.gamma))) + 1


def y_axis(mdp: MdpSpec, mode: str = "exact", n_grid: int = 64) -> np.ndarray:
    if mode == "exact":
        return np.array(reachable_y_support(mdp, support_horizon(mdp)))
    return np.linspace(0.0, mdp.r_bar, n_grid)


def zeros_extended(mdp: MdpSpec, mode: str = "exact", *, q: bool = True, n_grid: int = 64):
    ys = y_axis(mdp, mode, n_grid)
    shape = (mdp.n_states, mdp.n_actions, ys.size) if q else (mdp.n_states, ys.size)
    return ExtendedTable(np.zeros(shape), ys, mdp.r_bar, mode)


def lower_bound_extended(mdp: MdpSpec, mode: str = "exact", *, q: bool = True, n_grid: int = 64):
    """Table initialised at the boundary condition ``q(s, a, y) = y``."""
    t = zeros_extended(mdp, mode, q=q, n_grid=n_grid)
    t.values[...] = t.ys
    return t


class _ExtendedDynamics:
    """Successor y' for every (s, a, s', y) and how to read a table there."""

    def __init__(self, mdp: MdpSpec, ys: np.ndarray, mode: str):
        R = mdp.reward[..., None]
        self.y_next = np.maximum(R, ys) / mdp.gamma  # (S, A, S, Y)
        self.analytic = self.y_next >= mdp.r_bar * (1.0 - LOOKUP_RTOL)
        yq = np.where(self.analytic, ys[0], self.y_next)
        self.s_next = np.broadcast_to(np.arange(mdp.n_states)[None, None, :, None], yq.shape)
        self.mode = mode
        if mode == "exact":
            idx = np.clip(np.searchsorted(ys, yq), 0, ys.size - 1)
            lower = np.clip(idx - 1, 0, ys.size - 1)
            use_lower = np.abs(ys[lower] - yq) < np.abs(ys[idx] - yq)
            idx = np.where(use_lower, lower, idx)
            err = np.abs(ys[idx] - yq) > LOOKUP_RTOL * np.maximum(1.0, yq)
            relevant = err & (mdp.transition[..., None] > 0)
            if relevant.any():
                bad = float(yq[relevant][0])
                raise RuntimeError(
                    f"successor y'={bad!r} is off the support; build it with a longer horizon"
                )
            self.idx = idx
        else:
            hi = np.clip(np.searchsorted(ys, yq, side="right"), 1, ys.size - 1)
            lo = hi - 1
            self.lo, self.hi = lo, hi
            self.w = np.clip((yq - ys[lo]) / (ys[hi] - ys[lo]), 0.0, 1.0)

    def read(self, V: np.ndarray) -> np.ndarray:
        """``V(s', y')`` for a state-value array V of shape (S, Y); analytic where y' >= r_bar."""
        if self.mode == "exact":
            inner = V[self.s_next, self.idx]
        else:
            inner = V[self.s_next, self.lo] * (1.0 - self.w) + V[self.s_next, self.hi] * self.w
        return np.where(self.analytic, self.y_next, np.maximum(self.y_next, inner))


_dynamics_cache: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _dynamics(mdp: MdpSpec, table: ExtendedTable) -> _ExtendedDynamics:
    per_mdp = _dynamics_cache.setdefault(mdp, {})
    key = (table.mode, table.ys.tobytes())
    if key not in per_mdp:
        per_mdp[key] = _ExtendedDynamics(mdp, table.ys, table.mode)
    return per_mdp[key]


def _policy_over_y(policy: np.ndarray, n_y: int) -> np.ndarray:
    """Broadcast an (S, A) policy to (S, Y, A); pass (S, Y, A) through."""
    policy = np.asarray(policy, dtype=float)
    if policy.ndim == 2:
        return np.broadcast_to(policy[:, None, :], (policy.shape[0], n_y, policy.shape[1]))
    return policy


# -- cumulative and deterministic max-reward operators on (S, A) tables --------

def bellman_cumulative_opt(q: np.ndarray, mdp: MdpSpec) -> np.ndarray:
    v = q.max(axis=1)
    return np.einsum("sat,sat->sa", mdp.transition, mdp.reward + mdp.gamma * v[None, None, :])


def bellman_cumulative_onpolicy(q: np.ndarray, mdp: MdpSpec, policy: np.ndarray) -> np.ndarray:
    v = np.sum(policy * q, axis=1)
    return np.einsum("sat,sat->sa", mdp.transition, mdp.reward + mdp.gamma * v[None, None, :])


def bellman_maxdet_opt(q: np.ndarray, mdp: MdpSpec) -> np.ndarray:
    v = q.max(axis=1)
    return np.einsum("sat,sat->sa", mdp.transition, np.maximum(mdp.reward, mdp.gamma * v))


def bellman_maxdet_onpolicy(q: np.ndarray, mdp: MdpSpec, policy: np.ndarray) -> np.ndarray:
    """``E_{s', a'}[r v gamma q(s', a')]``: the expectation over a' sits outside the max."""
    inner = np.maximum(mdp.reward[..., None], mdp.gamma * q[None, None, :, :])  # (S, A, S', A')
    return np.einsum("sat,satb,tb->sa", mdp.transition, inner, policy)


# -- max-reward operators on extended tables -----------------------------------

def _extended_backup(table: ExtendedTable, mdp: MdpSpec, V: np.ndarray) -> np.ndarray:
    inner = _dynamics(mdp, table).read(V)  # (S, A, S', Y)
    return mdp.gamma * np.einsum("sat,saty->say", mdp.transition, inner)


def bellman_max_opt_extended(q: ExtendedTable, mdp: MdpSpec) -> ExtendedTable:
    V = q.values.max(axis=1)  # (S, Y)
    return q.replace(_extended_backup(q, mdp, V))


def bellman_max_onpolicy(q: ExtendedTable, mdp: MdpSpec, policy: np.ndarray) -> ExtendedTable:
    """On-policy operator for q-tables (S, A, Y) or v-tables (S, Y).

    ``policy`` is (S, A) or, for extended policies, (S, Y, A) on the table's axis.
    """
    pi = _policy_over_y(policy, q.ys.size)
    if q.is_q:
        V = np.einsum("sya,say->sy", pi, q.values)
        return q.replace(_extended_backup(q, mdp, V))
    Q = _extended_backup(q, mdp, q.values)  # (S, A, Y)
    return q.replace(np.einsum("sya,say->sy", pi, Q))


def q_from_v(v: ExtendedTable, mdp: MdpSpec) -> ExtendedTable:
    """``q(s, a, y) = gamma * E[y' v v(s', y')]``."""
    return v.replace(_extended_backup(v, mdp, v.values))


# -- iteration and policies ----------------------------------------------------

def _arr(t):
    return t.values if isinstance(t, ExtendedTable) else np.asarray(t)


def value_iteration(operator, init, tol: float = 1e-9, max_iters: int = 100_000):
    """Iterate ``operator`` from ``init`` until the sup-norm step falls below ``tol``.

    Returns ``(table, residuals)`` where ``residuals[k]`` is the sup-norm
    distance between iterates k and k+1.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    table = init
    residuals = []
    for _ in range(max_iters):
        nxt = operator(table)
        res = float(np.max(np.abs(_arr(nxt) - _arr(table))))
        residuals.append(res)
        table = nxt
        if res < tol:
            break
    else:
        log.warning("value iteration hit max_iters=%d with residual %.3g", max_iters, residuals[-1])
    return table, residuals


def greedy_policy(table, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Argmax over the action axis; near-ties go to the lowest action id.

    Accepts an (S, A) array or an extended q-table, returning (S,) or (S, Y).
    """
    q = _arr(table)
    if isinstance(table, ExtendedTable):
        q = np.moveaxis(q, 1, -1)  # (S, Y, A)
    best = q.max(axis=-1, keepdims=True)
    near = q >= best - tie_tol * np.maximum(1.0, np.abs(best))
    return np.argmax(near, axis=-1)


def one_hot_policy(actions: np.ndarray, n_actions: int) -> np.ndarray:
    return np.eye(n_actions)[np.asarray(actions)]


def solve_cumulative(mdp: MdpSpec, tol: float = 1e-9):
    return value_iteration(lambda q: bellman_cumulative_opt(q, mdp),
                           np.zeros((mdp.n_states, mdp.n_actions)), tol)


def solve_maxdet(mdp: MdpSpec, tol: float = 1e-9):
    return value_iteration(lambda q: bellman_maxdet_opt(q, mdp),
                           np.zeros((mdp.n_states, mdp.n_actions)), tol)


def solve_extended(mdp: MdpSpec, mode: str = "exact", tol: float = 1e-9, n_grid: int = 64):
    return value_iteration(lambda q: bellman_max_opt_extended(q, mdp),
                           zeros_extended(mdp, mode, n_grid=n_grid), tol)


def evaluate_extended(mdp: MdpSpec, policy, mode: str = "exact", *, q: bool = True,
                      tol: float = 1e-9, n_grid: int = 64):
    return value_iteration(lambda t: bellman_max_onpolicy(t, mdp, policy),
                           zeros_extended(mdp, mode, q=q, n_grid=n_grid), tol)


def evaluate_maxdet(mdp: MdpSpec, policy: np.ndarray, tol: float = 1e-12):
    return value_iteration(lambda q: bellman_maxdet_onpolicy(q, mdp, policy),
                           np.zeros((mdp.n_states, mdp.n_actions)), tol)


def extended_policy_fn(table: ExtendedTable, policy_sya: np.ndarray):
    """Wrap an extended (S, Y, A) policy as ``f(s, y) -> action probabilities``."""
    n_a = policy_sya.shape[-1]

    def f(s, y):
        if y >= table.r_bar:
            # every action is worth exactly y here; any choice is optimal
            p = np.zeros(n_a)
            p[0] = 1.0
            return p
        return policy_sya[s, table.y_index(y)]

    return f


# -- brute-force oracle --------------------------------------------------------

def evaluate_return_bruteforce(mdp: MdpSpec, policy, horizon: int, mode: str = "max", *,
                               first_action: int | None = None, guard: int = 10_000_000):
    """Exact expected return over all length-``horizon`` trajectories from each state.

    The trajectory distribution is propagated forward as probability mass on
    (state, running discounted max) atoms; paths that reach an identical atom
    are merged, which keeps the enumeration exact without exponential growth.
    ``policy`` is an (S, A) array or ``f(s, y) -> probs`` for extended policies.
    Returns ``(values, bound)`` where ``bound`` caps the truncation error.
    """
    if mode not in ("max", "cum"):
        raise ValueError(f"mode must be 'max' or 'cum', got {mode!r}")
    P, R, g = mdp.transition, mdp.reward, mdp.gamma
    if callable(policy):
        pol = policy
    else:
        arr = np.asarray(policy, dtype=float)
        pol = lambda s, y: arr[s]  # noqa: E731
    S, A = mdp.n_states, mdp.n_actions
    values = np.zeros(S)
    for s0 in range(S):
        atoms = {(s0, 0.0): 1.0}
        frozen = 0.0  # max mode: mass whose running max can no longer change
        cum = 0.0
        disc = 1.0
        for t in range(horizon):
            nxt: dict = {}
            for (s, m), p in atoms.items():
                y = m / disc if disc > 0 else 0.0
                if t == 0 and first_action is not None:
                    probs = np.zeros(A)
                    probs[first_action] = 1.0
                else:
                    probs = pol(s, y)
                for a in np.flatnonzero(probs):
                    for s2 in np.flatnonzero(P[s, a]):
                        w = p * probs[a] * P[s, a, s2]
                        r = R[s, a, s2]
                        cum += w * disc * r
                        key = (int(s2), max(m, disc * r))
                        nxt[key] = nxt.get(key, 0.0) + w
            disc *= g
            atoms = {}
            for (s, m), p in nxt.items():
                if mode == "max" and m >= disc * mdp.r_bar:
                    frozen += p * m
                else:
                    atoms[(s, m)] = p
            if len(atoms) > guard:
                raise RuntimeError(f"enumeration exceeds guard of {guard} atoms")
        if mode == "max":
            values[s0] = frozen + sum(p * m for (_, m), p in atoms.items())
        else:
            values[s0] = cum
    if mode == "max":
        bound = g**horizon * mdp.r_bar
    else:
        bound = g**horizon * mdp.r_bar / (1.0 - g) if g < 1 else math.inf
    return values, bound


def jensen_gap(mdp: MdpSpec, policy: np.ndarray, horizon: int) -> np.ndarray:
    """Per-state ``E[max-reward return] - v_det`` for a y-independent policy."""
    expected, _ = evaluate_return_bruteforce(mdp, policy, horizon, "max")
    q_det, _ = evaluate_maxdet(mdp, policy)
    v_det = np.sum(policy * q_det, axis=1)
    return expected - v_det


# -- chain experiment ----------------------------------------------------------

def chain_experiment(x: float, p_skip: float, operator_kind: str, seed: int,
                     epochs_cap: int = 20_000, gamma: float = 0.99) -> int:
    """Epochs of in-place tabular sweeps until the greedy policy is optimal.

    Each epoch visits every (s, a, s') transition in lexicographic order and
    overwrites ``q(s, a)`` with its target; updates of transitions into the
    goal are skipped with probability ``p_skip``.  Optimality must survive
    one further epoch.  Returns ``CAPPED`` when ``epochs_cap`` is reached.
    """
    if not 0.0 <= p_skip < 1.0:
        raise ValueError("p_skip must lie in [0, 1)")
    if operator_kind not in ("cumulative", "max_det"):
        raise ValueError(f"unknown operator {operator_kind!r}")
    mdp = build_chain(ChainConfig(x=x, gamma=gamma))
    cumulative = operator_kind == "cumulative"
    rng = np.random.default_rng(seed)
    transitions = [
        (s, a, int(s2), float(mdp.reward[s, a, s2]))
        for s in range(mdp.n_states)
        for a in range(mdp.n_actions)
        for s2 in np.flatnonzero(mdp.transition[s, a])
    ]
    q = [[0.0] * mdp.n_actions for _ in range(mdp.n_states)]
    optimal = chain_optimal_actions()

    def is_optimal():
        return all(int(a) in optimal[s] for s, a in enumerate(greedy_policy(np.array(q))))

    def sweep():
        for s, a, s2, r in transitions:
            if s2 == CHAIN_GOAL and rng.random() < p_skip:
                continue
            v = max(q[s2])
            q[s][a] = r + gamma * v if cumulative else max(r, gamma * v)

    for epoch in range(1, epochs_cap + 1):
        sweep()
        if is_optimal():
            sweep()
            if is_optimal():
                return epoch
    return CAPPED


# -- CSV -----------------------------------------------------------------------

def write_table_csv(table, path: str | Path) -> None:
    """Rows ``s, a, [y,] value`` under a ``# schema=1`` header."""
    with open(path, "w", newline="") as fh:
        fh.write("# schema=1\n")
        w = csv.writer(fh, lineterminator="\n")
        if isinstance(table, ExtendedTable):
            w.writerow(["s", "a", "y", "value"] if table.is_q else ["s", "y", "value"])
            for idx in np.ndindex(table.values.shape):
                y = table.ys[idx[-1]]
                w.writerow([*idx[:-1], repr(float(y)), repr(float(table.values[idx]))])
        else:
            q = np.asarray(table)
            w.writerow(["s", "a", "value"])
            for (s, a), v in np.ndenumerate(q):
                w.writerow([s, a, repr(float(v))])


def read_table_csv(path: str | Path, r_bar: float | None = None, mode: str = "exact"):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    if "y" not in header:
        S = 1 + max(int(r[0]) for r in body)
        A = 1 + max(int(r[1]) for r in body)
        q = np.zeros((S, A))
        for s, a, v in body:
            q[int(s), int(a)] = float(v)
        return q
    ys = np.array(sorted({float(r[header.index("y")]) for r in body}))
    lookup = {y: k for k, y in enumerate(ys)}
    keys = [[int(c) for c in r[: header.index("y")]] for r in body]
    shape = tuple(1 + max(k[i] for k in keys) for i in range(len(keys[0]))) + (ys.size,)
    vals = np.zeros(shape)
    for k, r in zip(keys, body):
        vals[(*k, lookup[float(r[-2])])] = float(r[-1])
    return ExtendedTable(vals, ys, ys[-1] if r_bar is None else r_bar, mode)
