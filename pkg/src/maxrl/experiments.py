"""Experiment drivers shared by the command line and the acceptance suite."""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field

import numpy as np

from .agents.config import DSP_BETA_DEFAULTS, GAMMA_DEFAULTS, default_config
from .agents.train import AGENT_KINDS, METRIC_COLUMNS, ConfigError, train
from .environments import (
    MdpEnv,
    PointMazeEnv,
    ReachEnv,
    RewardKind,
    SlipWrapper,
    GridMazeEnv,
    build_bandit,
    build_three_state,
    load_layout,
)
from .environments.tabular import A_PI1, A_PI2, S0, S1
from .solvers import (
    CAPPED,
    chain_experiment,
    evaluate_extended,
    evaluate_maxdet,
    evaluate_return_bruteforce,
    greedy_policy,
    solve_extended,
    solve_maxdet,
)

SCHEMA_LINE = "# schema=1"
CREATED_PREFIX = "# created="

CHAIN_XS = tuple(round(0.1 * k, 1) for k in range(1, 10))
CHAIN_P_SKIPS = (0.0, 0.3, 0.6, 0.9)
CHAIN_OPERATORS = ("cumulative", "max_det")
CHAIN_COLUMNS = ("x", "p_skip", "operator", "seed", "epochs", "capped")

ENV_NAMES = ("gridworld", "pointmaze", "reach", "bandit")


# -- counterexample --------------------------------------------------------------

@dataclass
class CounterexampleReport:
    expected_max_return: tuple  # (pi1, pi2) from s0
    q_det_s0: tuple
    objective: tuple
    det_greedy: str  # "pi1" or "pi2": the choice at s1
    extended_greedy: str  # choice at (s1, y = 6)
    reference: dict = field(default_factory=lambda: {
        "expected_max_return": (9.0, 8.0),
        "q_det_s0": (6.0, 8.0),
        "objective": (9.0, 8.0),
        "det_greedy": "pi2",
        "extended_greedy": "pi1",
    })

    def deviations(self, tol: float = 1e-9) -> list[str]:
        out = []
        for name in ("expected_max_return", "q_det_s0", "objective"):
            got, want = getattr(self, name), self.reference[name]
            for label, g, w in zip(("pi1", "pi2"), got, want):
                if abs(g - w) > tol:
                    out.append(f"{name}[{label}] = {g!r}, expected {w!r}")
        for name in ("det_greedy", "extended_greedy"):
            if getattr(self, name) != self.reference[name]:
                out.append(f"{name} = {getattr(self, name)}, expected {self.reference[name]}")
        return out

    def lines(self) -> list[str]:
        return [
            f"E[max return from s0]   pi1 = {self.expected_max_return[0]:.12g}   pi2 = {self.expected_max_return[1]:.12g}",
            f"q_det(s0)               pi1 = {self.q_det_s0[0]:.12g}   pi2 = {self.q_det_s0[1]:.12g}",
            f"J (extended, y = 0)     pi1 = {self.objective[0]:.12g}   pi2 = {self.objective[1]:.12g}",
            f"deterministic-operator greedy at s1: {self.det_greedy}",
            f"extended-operator greedy at (s1, y=6): {self.extended_greedy}",
        ]


def _choice(action: int) -> str:
    return {A_PI1: "pi1", A_PI2: "pi2"}[int(action)]


def counterexample_report() -> CounterexampleReport:
    mdp, pi1, pi2 = build_three_state()
    horizon = 3
    exp = tuple(float(evaluate_return_bruteforce(mdp, pi, horizon, "max")[0][S0]) for pi in (pi1, pi2))
    qdet = []
    for pi in (pi1, pi2):
        q, _ = evaluate_maxdet(mdp, pi)
        qdet.append(float(np.sum(pi[S0] * q[S0])))
    obj = []
    for pi in (pi1, pi2):
        v, _ = evaluate_extended(mdp, pi, q=False, tol=1e-12)
        obj.append(float(v.values[S0, 0]))
    q_det_opt, _ = solve_maxdet(mdp, tol=1e-12)
    q_ext, _ = solve_extended(mdp, tol=1e-12)
    det_choice = _choice(greedy_policy(q_det_opt)[S1])
    ext_choice = _choice(greedy_policy(q_ext)[S1, q_ext.y_index(6.0)])
    return CounterexampleReport(exp, tuple(qdet), tuple(obj), det_choice, ext_choice)


# -- chain sweep -----------------------------------------------------------------

def chain_sweep(xs=CHAIN_XS, p_skips=CHAIN_P_SKIPS, seeds=range(10),
                operators=CHAIN_OPERATORS) -> list[dict]:
    rows = []
    for x in xs:
        for p in p_skips:
            for op in operators:
                for seed in seeds:
                    epochs = chain_experiment(x, p, op, seed)
                    rows.append({"x": x, "p_skip": p, "operator": op, "seed": seed,
                                 "epochs": epochs, "capped": int(epochs == CAPPED)})
    return rows


def chain_medians(rows) -> dict:
    """Median epochs per (x, p_skip, operator); capped runs count as infinite."""
    groups: dict = {}
    for r in rows:
        e = float("inf") if r["capped"] else r["epochs"]
        groups.setdefault((r["x"], r["p_skip"], r["operator"]), []).append(e)
    return {k: statistics.median(v) for k, v in groups.items()}


# -- training --------------------------------------------------------------------

def _family(agent: str) -> str:
    return "td3" if agent.startswith("td3") else "ppo"


def reward_kind(env_cfg: dict, agent: str) -> RewardKind:
    """Reward settings with per-family defaults: DSP beta by agent family and
    negative DSP for the cumulative baselines."""
    spec = dict(env_cfg.get("reward") or {})
    kind = spec.get("kind", "dsp")
    beta = spec.get("beta")
    if beta is None:
        beta = DSP_BETA_DEFAULTS[_family(agent)] if kind == "dsp" else 0.9
    negative = spec.get("negative")
    if negative is None:
        negative = kind == "dsp" and agent.endswith("_std")
    return RewardKind(kind, int(spec.get("k", 1)), float(beta), bool(negative))


def make_env_factory(env_cfg: dict, agent: str):
    """``make_env(rng)`` for an environment section of a run config."""
    name = env_cfg.get("name", "gridworld")
    slip = float(env_cfg.get("slip", 0.0))
    t_max = int(env_cfg.get("t_max", 100))
    if name == "gridworld":
        layout = load_layout(env_cfg.get("layout", "single_goal"))
        rk = reward_kind(env_cfg, agent)
        base = lambda rng: GridMazeEnv(layout, rk, rng, t_max=t_max)  # noqa: E731
    elif name == "pointmaze":
        layout = load_layout(env_cfg.get("layout", "point_u"))
        rk = reward_kind(env_cfg, agent)
        base = lambda rng: PointMazeEnv(layout, rk, rng, t_max=t_max)  # noqa: E731
    elif name == "reach":
        base = lambda rng: ReachEnv(rng, t_max=t_max)  # noqa: E731
    elif name == "bandit":
        mdp = build_bandit(tuple(env_cfg.get("rewards", (0.2, 1.0))))
        best = max(mdp.reward.max(), 0.0)
        base = lambda rng: MdpEnv(mdp, rng, t_max=1, success_reward=best)  # noqa: E731
    else:
        raise ConfigError(f"unknown environment {name!r}; expected one of {ENV_NAMES}")
    if slip > 0.0:
        return lambda rng: SlipWrapper(base(rng), slip, rng)
    return base


def agent_config(agent: str, hyper: dict | None):
    """Defaults for ``agent`` (with its discount) overridden by ``hyper``."""
    if agent not in AGENT_KINDS:
        raise ConfigError(f"unknown agent {agent!r}; expected one of {AGENT_KINDS}")
    base = default_config(agent).to_dict()
    hyper = dict(hyper or {})
    unknown = sorted(set(hyper) - set(base))
    if unknown:
        raise ConfigError(f"unknown hyperparameters for {agent}: {', '.join(unknown)}")
    base.update(hyper)
    if "hidden" in base:
        base["hidden"] = tuple(base["hidden"])
    cfg = type(default_config(agent)).from_dict(base)
    errors = cfg.validate()
    if errors:
        raise ConfigError("; ".join(errors))
    return cfg


def run_training(agent: str, env_cfg: dict, hyper: dict | None, seeds, budget: int,
                 eval_interval: int, eval_episodes: int) -> list[dict]:
    cfg = agent_config(agent, hyper)
    make_env = make_env_factory(env_cfg, agent)
    rows = []
    for seed in seeds:
        rows.extend(train(agent, make_env, cfg, int(seed), int(budget),
                          eval_interval=eval_interval, eval_episodes=eval_episodes))
    return rows


def final_success(rows) -> dict:
    """Last evaluation's success ratio per seed."""
    out = {}
    for r in rows:
        out[r["seed"]] = r["eval_success_ratio"]
    return out


def peak_mean_success(rows) -> float:
    """Highest seed-mean success over evaluation points shared by all seeds."""
    by_step: dict = {}
    for r in rows:
        by_step.setdefault(r["env_steps"], []).append(r["eval_success_ratio"])
    n = len({r["seed"] for r in rows})
    means = [float(np.mean(v)) for v in by_step.values() if len(v) == n]
    return max(means) if means else float("nan")


# -- CSV -------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, columns, created: str | None = None) -> str:
    """CSV text with the schema line and an optional creation-time comment."""
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    if created is not None:
        buf.write(f"{CREATED_PREFIX}{created}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def strip_timestamp(text: str) -> str:
    return "".join(line for line in text.splitlines(keepends=True)
                   if not line.startswith(CREATED_PREFIX))


def read_csv_rows(text: str) -> list[dict]:
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


__all__ = [
    "CHAIN_COLUMNS",
    "GAMMA_DEFAULTS",
    "METRIC_COLUMNS",
    "CounterexampleReport",
    "agent_config",
    "chain_medians",
    "chain_sweep",
    "counterexample_report",
    "final_success",
    "make_env_factory",
    "peak_mean_success",
    "reward_kind",
    "rows_to_csv",
    "run_training",
]
