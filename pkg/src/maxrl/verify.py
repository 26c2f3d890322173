"""Seeded property suites for the Bellman operators.

Each suite runs many independent cases, one seed per case, and reports the
seeds of failing cases so a failure can be replayed in isolation.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .mdp import random_mdp
from .solvers import (
    ExtendedTable,
    bellman_cumulative_opt,
    bellman_max_onpolicy,
    bellman_max_opt_extended,
    bellman_maxdet_opt,
    evaluate_extended,
    evaluate_return_bruteforce,
    extended_policy_fn,
    greedy_policy,
    jensen_gap,
    one_hot_policy,
    solve_extended,
    y_axis,
)

CONTRACTION_SLACK = 1e-12
RECOVERY_SLACK = 1e-9
JENSEN_TOL = 1e-9
OPERATORS = ("cumulative", "max_det", "max_extended", "max_onpolicy")
SUITES = ("contraction", "fixedpoint", "jensen", "recovery")


@dataclass
class SuiteResult:
    name: str
    n_cases: int
    failures: list = field(default_factory=list)  # (seed, message)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = f"{status} {self.name}: {self.n_cases - len(self.failures)}/{self.n_cases} cases"
        if self.failures:
            seed, msg = self.failures[0]
            line += f"; first failing seed {seed}: {msg}"
        return line


def horizon_for(gamma: float, eps: float = 1e-8) -> int:
    """Smallest H with ``gamma**H <= eps``."""
    return int(math.ceil(math.log(eps) / math.log(gamma)))


def _case_mdp(rng: np.random.Generator, *, deterministic: bool = False, gamma=None):
    S = int(rng.integers(2, 5))
    A = int(rng.integers(1, 4))
    g = float(rng.uniform(0.5, 0.8)) if gamma is None else gamma
    return random_mdp(rng, S, A, g, deterministic=deterministic)


def _random_policy(rng, S, A) -> np.ndarray:
    return rng.dirichlet(np.ones(A), size=S)


def _operator_pair(kind: str, rng: np.random.Generator):
    """An MDP, its operator and a sampler of random tables in the operator's domain."""
    mdp = _case_mdp(rng)
    S, A = mdp.n_states, mdp.n_actions
    if kind in ("cumulative", "max_det"):
        op = (lambda q: bellman_cumulative_opt(q, mdp)) if kind == "cumulative" else (
            lambda q: bellman_maxdet_opt(q, mdp))
        scale = mdp.r_bar / (1.0 - mdp.gamma) if kind == "cumulative" else mdp.r_bar

        def sample():
            return rng.uniform(-scale, 2.0 * scale, size=(S, A))

        return mdp, op, sample, lambda t: t
    ys = y_axis(mdp)
    if kind == "max_extended":
        op = lambda q: bellman_max_opt_extended(q, mdp)  # noqa: E731
    else:
        pi = rng.dirichlet(np.ones(A), size=(S, ys.size))
        op = lambda q: bellman_max_onpolicy(q, mdp, pi)  # noqa: E731

    def sample():
        return ExtendedTable(rng.uniform(-1.0, 2.0, size=(S, A, ys.size)) * mdp.r_bar, ys, mdp.r_bar)

    return mdp, op, sample, lambda t: t.values


def contraction_suite(n_pairs: int = 1000, seed: int = 0, operators=OPERATORS) -> SuiteResult:
    """``||T q - T z|| <= gamma ||q - z|| + slack`` on random table pairs, per operator."""
    t0 = time.perf_counter()
    res = SuiteResult("contraction", n_pairs * len(operators))
    for k, kind in enumerate(operators):
        for i in range(n_pairs):
            case_seed = seed + 100_000 * k + i
            rng = np.random.default_rng(case_seed)
            mdp, op, sample, arr = _operator_pair(kind, rng)
            q, z = sample(), sample()
            lhs = float(np.max(np.abs(arr(op(q)) - arr(op(z)))))
            rhs = mdp.gamma * float(np.max(np.abs(arr(q) - arr(z)))) + CONTRACTION_SLACK
            if not lhs <= rhs:
                res.failures.append((case_seed, f"{kind}: {lhs:.6g} > {rhs:.6g}"))
    res.seconds = time.perf_counter() - t0
    return res


def _decays(residuals, gamma: float) -> bool:
    r = np.asarray(residuals)
    return bool(np.all(r[1:] <= gamma * r[:-1] + CONTRACTION_SLACK))


def fixedpoint_suite(n_mdps: int = 50, seed: int = 0) -> SuiteResult:
    """On-policy extended fixed points at y = 0 against the enumeration oracle."""
    t0 = time.perf_counter()
    res = SuiteResult("fixedpoint", n_mdps)
    for i in range(n_mdps):
        case_seed = seed + i
        rng = np.random.default_rng(case_seed)
        mdp = _case_mdp(rng)
        pi = _random_policy(rng, mdp.n_states, mdp.n_actions)
        H = horizon_for(mdp.gamma)
        v, residuals = evaluate_extended(mdp, pi, q=False, tol=1e-13)
        oracle, bound = evaluate_return_bruteforce(mdp, pi, H, "max")
        err = float(np.max(np.abs(v.values[:, 0] - oracle)))
        if err > bound + RECOVERY_SLACK:
            res.failures.append((case_seed, f"|v(s,0) - E[G]| = {err:.3g} > {bound + RECOVERY_SLACK:.3g}"))
        elif not _decays(residuals, mdp.gamma):
            res.failures.append((case_seed, "residuals do not decay at rate gamma"))
    res.seconds = time.perf_counter() - t0
    return res


def recovery_suite(n_mdps: int = 50, seed: int = 0) -> SuiteResult:
    """Optimal extended values at y = 0 equal the enumerated return of their greedy policy."""
    t0 = time.perf_counter()
    res = SuiteResult("recovery", n_mdps)
    for i in range(n_mdps):
        case_seed = seed + i
        rng = np.random.default_rng(case_seed)
        mdp = _case_mdp(rng)
        q, residuals = solve_extended(mdp, tol=1e-13)
        greedy = one_hot_policy(greedy_policy(q), mdp.n_actions)  # (S, Y, A)
        H = horizon_for(mdp.gamma)
        oracle, bound = evaluate_return_bruteforce(mdp, extended_policy_fn(q, greedy), H, "max")
        v0 = q.values[:, :, 0].max(axis=1)
        err = float(np.max(np.abs(v0 - oracle)))
        if err > bound + RECOVERY_SLACK:
            res.failures.append((case_seed, f"|v*(s,0) - E[G]| = {err:.3g} > {bound + RECOVERY_SLACK:.3g}"))
        elif not _decays(residuals, mdp.gamma):
            res.failures.append((case_seed, "residuals do not decay at rate gamma"))
    res.seconds = time.perf_counter() - t0
    return res


def jensen_suite(n_stochastic: int = 100, n_deterministic: int = 20, seed: int = 0) -> SuiteResult:
    """``E[G] - q_det >= 0`` in general, with equality for deterministic MDPs and policies."""
    t0 = time.perf_counter()
    res = SuiteResult("jensen", n_stochastic + n_deterministic)
    for i in range(n_stochastic):
        case_seed = seed + i
        rng = np.random.default_rng(case_seed)
        mdp = _case_mdp(rng)
        pi = _random_policy(rng, mdp.n_states, mdp.n_actions)
        gap = jensen_gap(mdp, pi, horizon_for(mdp.gamma))
        if gap.min() < -JENSEN_TOL:
            res.failures.append((case_seed, f"stochastic gap {gap.min():.3g} < 0"))
    for i in range(n_deterministic):
        case_seed = seed + 50_000 + i
        rng = np.random.default_rng(case_seed)
        mdp = _case_mdp(rng, deterministic=True)
        pi = one_hot_policy(rng.integers(mdp.n_actions, size=mdp.n_states), mdp.n_actions)
        gap = jensen_gap(mdp, pi, horizon_for(mdp.gamma))
        if np.abs(gap).max() > JENSEN_TOL:
            res.failures.append((case_seed, f"deterministic |gap| {np.abs(gap).max():.3g}"))
    res.seconds = time.perf_counter() - t0
    return res


def run_suite(name: str, seed: int = 0) -> SuiteResult:
    if name == "contraction":
        return contraction_suite(seed=seed)
    if name == "fixedpoint":
        return fixedpoint_suite(seed=seed)
    if name == "recovery":
        return recovery_suite(seed=seed)
    if name == "jensen":
        return jensen_suite(seed=seed)
    raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
