"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

from __future__ import annotations

import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from maxrl.agents.ppo import PolicyHead, ValueNet
from maxrl.agents.td3 import Actor, Critic
from maxrl.cli import RunConfig
from maxrl.environments.core import Box, Discrete
from maxrl.experiments import (
    CHAIN_P_SKIPS,
    CHAIN_XS,
    chain_medians,
    chain_sweep,
    counterexample_report,
    final_success,
    peak_mean_success,
    run_training,
    strip_timestamp,
)
from maxrl.neural import Mlp, log_softmax, value_head_transform
from maxrl.pg_check import run_deterministic_check, run_stochastic_check
from maxrl.verify import contraction_suite, fixedpoint_suite, jensen_suite, recovery_suite

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def report(capsys):
    def _report(number: int, title: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
        assert ok, detail

    return _report


def counts(res) -> str:
    line = f"{res.name} {res.n_cases - len(res.failures)}/{res.n_cases} cases"
    if res.failures:
        line += f", first failing seed {res.failures[0][0]}: {res.failures[0][1]}"
    return line


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


# 1 -------------------------------------------------------------------------

def test_criterion_1_counterexample(report):
    rep, secs = timed(counterexample_report)
    bad = rep.deviations(tol=1e-9)
    ok = not bad and secs < 1.0
    detail = (f"E[G] = {rep.expected_max_return}, q_det(s0) = {rep.q_det_s0}, J = {rep.objective}, "
              f"greedy det/extended = {rep.det_greedy}/{rep.extended_greedy}, {secs:.2f}s")
    report(1, "counterexample exactness", ok, detail + ("; " + "; ".join(bad) if bad else ""))


# 2-4 -----------------------------------------------------------------------

def test_criterion_2_contraction(report):
    res, secs = timed(contraction_suite, 1000)
    report(2, "contraction", res.passed and secs < 10.0, f"{counts(res)}, {secs:.1f}s")


def test_criterion_3_fixed_point_and_recovery(report):
    fp, s1 = timed(fixedpoint_suite, 50)
    rc, s2 = timed(recovery_suite, 50)
    ok = fp.passed and rc.passed and s1 + s2 < 60.0
    report(3, "fixed point and recovery", ok, f"{counts(fp)}; {counts(rc)}; {s1 + s2:.1f}s")


def test_criterion_4_jensen(report):
    res, secs = timed(jensen_suite, 100, 20)
    report(4, "jensen gap", res.passed and secs < 30.0, f"{counts(res)}, {secs:.1f}s")


# 5 -------------------------------------------------------------------------

def test_criterion_5_chain(report):
    rows, secs = timed(chain_sweep, CHAIN_XS, CHAIN_P_SKIPS, range(10))
    med = chain_medians(rows)
    faster = [x for x in CHAIN_XS if med[(x, 0.9, "max_det")] < med[(x, 0.9, "cumulative")]]
    recovered = all(not r["capped"] for r in rows if r["p_skip"] == 0.0)
    pins = {(r["x"], r["p_skip"], r["operator"]): r["epochs"] for r in rows if r["seed"] == 0}
    # self-derived regression values (seed 0)
    pinned = (pins[(0.5, 0.3, "cumulative")], pins[(0.5, 0.3, "max_det")],
              pins[(0.5, 0.9, "cumulative")], pins[(0.5, 0.9, "max_det")]) == (4, 2, 220, 5)
    ok = len(faster) == len(CHAIN_XS) and recovered and pinned and secs < 60.0
    detail = (f"max-reward faster at p_skip=0.9 for {len(faster)}/{len(CHAIN_XS)} x; "
              f"p_skip=0 recovered: {recovered}; regression pins hold: {pinned}; {secs:.1f}s")
    report(5, "chain experiment", ok, detail)


# 6 -------------------------------------------------------------------------

def test_criterion_6_policy_gradients(report):
    t0 = time.perf_counter()
    sto = run_stochastic_check(n_draws=20)
    near_det = run_stochastic_check(n_draws=20, scale=8.0)
    det = run_deterministic_check(n_draws=20)
    secs = time.perf_counter() - t0
    finite = all(np.isfinite(r.cosines).all() for r in (sto, near_det, det))
    ok = sto.passed and near_det.passed and det.passed and finite and secs < 30.0
    detail = (f"stochastic min cos {min(sto.cosines):.6f} (>= 0.999), near-deterministic "
              f"{min(near_det.cosines):.6f}, deterministic {min(det.cosines):.6f} (>= 0.99), "
              f"{len(sto.failures) + len(near_det.failures) + len(det.failures)} failures, {secs:.1f}s")
    report(6, "policy-gradient formulas", ok, detail)


# 7 -------------------------------------------------------------------------

H = 1e-6


def _rel(a, b):
    return float(np.abs(a - b).max() / max(1.0, np.abs(a).max(), np.abs(b).max()))


def _fd(loss, net: Mlp):
    flat = net.get_flat()
    g = np.zeros_like(flat)
    for i in range(flat.size):
        p = flat.copy()
        p[i] += H
        net.set_flat(p)
        up = loss()
        p[i] -= 2 * H
        net.set_flat(p)
        g[i] = (up - loss()) / (2 * H)
    net.set_flat(flat)
    return g


def _gradient_errors() -> dict:
    rng = np.random.default_rng(0)
    x = rng.normal(size=(6, 4))
    y = rng.uniform(0.0, 0.5, 6)
    w = rng.normal(size=6)
    errs = {}

    for act in ("relu", "tanh"):
        net = Mlp([4, 8, 8, 2], act, seed=1)
        wo = rng.normal(size=(6, 2))
        loss = lambda: float(np.sum(wo * net.forward(x)))  # noqa: E731
        loss()
        net.backward(wo)
        errs[f"mlp-{act}"] = _rel(net.grad_flat(), _fd(loss, net))

    u = np.linspace(-2, 2, 6)
    _, g = value_head_transform(u, y, 1.0)
    fd = (value_head_transform(u + H, y, 1.0)[0] - value_head_transform(u - H, y, 1.0)[0]) / (2 * H)
    errs["value-head"] = _rel(g, fd)

    for name, mod in (("critic-max", Critic(4, (8, 8), True, 1.0, 2)),
                      ("critic-std", Critic(4, (8, 8), False, 1.0, 2)),
                      ("value-max", ValueNet(4, (8, 8), True, 1.0, 3))):
        loss = lambda: float(np.sum(w * mod.forward(x, y)))  # noqa: E731
        loss()
        mod.backward(w)
        errs[name] = _rel(mod.net.grad_flat(), _fd(loss, mod.net))

    actor = Actor(4, 2, (8, 8), 1.0, 4)
    wa = rng.normal(size=(6, 2))
    loss = lambda: float(np.sum(wa * actor.forward(x)))  # noqa: E731
    loss()
    actor.backward(wa)
    errs["actor"] = _rel(actor.net.grad_flat(), _fd(loss, actor.net))

    cat = PolicyHead(4, Discrete(3), (8, 8), -0.5, 5)
    acts = rng.integers(3, size=6)
    loss = lambda: float(np.sum(w * log_softmax(cat.net.forward(x))[np.arange(6), acts]))  # noqa: E731
    _, _, dlogp, _, _, _ = cat.logp_entropy_grads(x, acts)
    cat.net.backward(w[:, None] * dlogp)
    errs["policy-categorical"] = _rel(cat.net.grad_flat(), _fd(loss, cat.net))

    gauss = PolicyHead(4, Box(-1.0, 1.0, 2), (8, 8), -0.5, 6)
    ca = rng.normal(size=(6, 2))
    loss = lambda: float(np.sum(w * gauss.gaussian_logp(gauss.net.forward(x), ca)))  # noqa: E731
    _, _, dlogp, _, dls, _ = gauss.logp_entropy_grads(x, ca)
    gauss.net.backward(w[:, None] * dlogp)
    errs["policy-gaussian"] = _rel(gauss.net.grad_flat(), _fd(loss, gauss.net))
    ls = gauss.log_std.params[0]
    fd = np.zeros_like(ls)
    for i in range(ls.size):
        ls[i] += H
        up = loss()
        ls[i] -= 2 * H
        fd[i] = (up - loss()) / (2 * H)
        ls[i] += H
    errs["log-std"] = _rel((w[:, None] * dls).sum(axis=0), fd)
    return errs


def test_criterion_7_neural_gradients(report):
    errs, secs = timed(_gradient_errors)
    worst = max(errs, key=errs.get)
    ok = all(e <= 1e-4 for e in errs.values()) and secs < 10.0
    report(7, "neural gradient integrity", ok,
           f"{len(errs)} architectures, worst {worst} rel err {errs[worst]:.2e} (<= 1e-4), {secs:.1f}s")


# 8-9 -----------------------------------------------------------------------

def _train_config(name: str):
    cfg = RunConfig.load(CONFIGS / f"{name}.yaml")
    t0 = time.perf_counter()
    rows = run_training(cfg.agent, cfg.env, cfg.hyper, cfg.seeds, cfg.budget,
                        cfg.eval_interval, cfg.eval_episodes)
    return cfg, rows, time.perf_counter() - t0


@pytest.fixture(scope="module")
def maze_runs():
    return {name: _train_config(name)
            for name in ("gridworld_ppo_max", "gridworld_ppo_std", "pointmaze_td3_max")}


@pytest.fixture(scope="module")
def slip_runs():
    return {name: _train_config(name) for name in ("slip_ppo_max", "slip_qlearn_det")}


def _final_mean(rows) -> float:
    return float(np.mean(list(final_success(rows).values())))


def test_criterion_8_desk_scale_maze(report, maze_runs):
    (cmax, rmax, t1), (cstd, rstd, t2), (ctd3, rtd3, t3) = (
        maze_runs[k] for k in ("gridworld_ppo_max", "gridworld_ppo_std", "pointmaze_td3_max"))
    same_setup = cmax.seeds == cstd.seeds and cmax.budget == cstd.budget
    ppo_peak = peak_mean_success(rmax)
    ppo_final, std_final = _final_mean(rmax), _final_mean(rstd)
    td3_peak = peak_mean_success(rtd3)
    secs = t1 + t2 + t3
    ok = (same_setup and len(cmax.seeds) == 5 and len(ctd3.seeds) == 5 and ppo_peak >= 0.8
          and ppo_final >= std_final and td3_peak >= 0.8 and secs <= 15 * 60)
    detail = (f"gridworld PPO-max peak seed-mean {ppo_peak:.2f}, final {ppo_final:.2f} vs PPO-std "
              f"final {std_final:.2f}; point-maze TD3-max peak seed-mean {td3_peak:.2f}; {secs:.0f}s")
    report(8, "desk-scale maze", ok, detail)


def test_criterion_9_slip_robustness(report, slip_runs):
    (cppo, rppo, _), (cq, rq, _) = slip_runs["slip_ppo_max"], slip_runs["slip_qlearn_det"]
    ppo, q = _final_mean(rppo), _final_mean(rq)
    ok = cppo.seeds == cq.seeds and len(cppo.seeds) == 5 and cppo.env.get("slip") == 0.2 and ppo > q
    report(9, "stochastic robustness", ok,
           f"slip 0.2: PPO-max final seed-mean {ppo:.2f} vs deterministic-operator Q-learning {q:.2f}")


# 10 ------------------------------------------------------------------------

def _cli(*args) -> None:
    subprocess.run([sys.executable, "-m", "maxrl.cli", *args], check=True,
                   stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)


def test_criterion_10_reproducibility(report, tmp_path):
    run_cfg = tmp_path / "reach.yaml"
    cfg = RunConfig.load(CONFIGS / "reach_td3_max.yaml")
    cfg.budget, cfg.eval_interval, cfg.seeds = 2000, 1000, [0, 1]
    cfg.hyper = {**cfg.hyper, "initial_steps": 500}
    run_cfg.write_text(cfg.dumps())
    commands = {
        "train": (["train", "--config", str(run_cfg)], "metrics.csv"),
        "chain-sweep": (["chain-sweep", "--x", "0.2,0.7", "--seeds", "0,1,2"], "chain_sweep.csv"),
        "solve": (["solve", "--operator", "max_extended"], "max_extended.csv"),
    }
    same = {}
    for name, (args, fname) in commands.items():
        texts = []
        for k in range(2):
            out = tmp_path / f"{name}-{k}"
            _cli(*args, "--out", str(out))
            texts.append(strip_timestamp((out / fname).read_text()))
        same[name] = texts[0] == texts[1] and len(texts[0]) > 0
    ok = all(same.values())
    report(10, "reproducibility", ok,
           ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()))
