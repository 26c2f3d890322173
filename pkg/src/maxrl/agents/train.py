"""Training loops for the four agent kinds and the tabular baseline.

``train`` is a generator of metric rows, one per evaluation point.  All
randomness comes from generators spawned off the run seed, so a
single-process run is bit-reproducible.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..environments.core import Box, Discrete
from ..returns import cum_return, max_return
from .buffer import ReplayBuffer
from .config import PpoConfig, QLearningConfig, Td3Config
from .noise import ExplorationNoise
from .ppo import PpoAgent
from .qlearning import TabularQLearner
from .td3 import Td3Agent

log = logging.getLogger(__name__)

AGENT_KINDS = ("td3_max", "td3_std", "ppo_max", "ppo_std", "qlearn_det")
METRIC_COLUMNS = ("wall_step", "env_steps", "eval_success_ratio", "eval_max_return",
                  "eval_cum_return", "critic_loss", "actor_loss", "seed")


class ConfigError(ValueError):
    pass


@dataclass
class EvalResult:
    success_ratio: float
    max_return: float
    cum_return: float


def _spawn(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def evaluate(policy_fn, make_env, rng: np.random.Generator, episodes: int, gamma: float,
             track_y: bool) -> EvalResult:
    """Greedy rollouts; ``policy_fn(obs, y) -> action``."""
    env = make_env(rng)
    succ, maxr, cumr = [], [], []
    for _ in range(episodes):
        obs, y = env.reset(), 0.0
        rewards, hit = [], False
        while True:
            a = policy_fn(obs[None, :], np.array([y]))[0]
            obs, r, trunc, info = env.step(a)
            rewards.append(r)
            hit |= bool(info["success"])
            if track_y:
                y = max(r, y) / gamma
            if trunc:
                break
        succ.append(float(hit))
        maxr.append(max_return(rewards, gamma))
        cumr.append(cum_return(rewards, gamma))
    return EvalResult(float(np.mean(succ)), float(np.mean(maxr)), float(np.mean(cumr)))


def _row(wall_step, env_steps, ev: EvalResult, critic_loss, actor_loss, seed):
    return {
        "wall_step": wall_step,
        "env_steps": env_steps,
        "eval_success_ratio": ev.success_ratio,
        "eval_max_return": ev.max_return,
        "eval_cum_return": ev.cum_return,
        "critic_loss": critic_loss,
        "actor_loss": actor_loss,
        "seed": seed,
    }


def train(kind: str, make_env, cfg, seed: int, budget: int, *, eval_interval: int = 5000,
          eval_episodes: int = 20):
    """Run ``kind`` for ``budget`` environment steps; yields metric rows.

    ``make_env(rng) -> Env`` builds one environment instance.
    """
    if kind not in AGENT_KINDS:
        raise ConfigError(f"unknown agent kind {kind!r}; expected one of {AGENT_KINDS}")
    errors = cfg.validate()
    if errors:
        raise ConfigError("; ".join(errors))
    probe = make_env(np.random.default_rng(0))
    if kind.startswith("td3") and not isinstance(probe.action_space, Box):
        raise ConfigError("TD3 needs a continuous action space")
    if kind == "qlearn_det" and not isinstance(probe.action_space, Discrete):
        raise ConfigError("tabular Q-learning needs a discrete action space")
    if kind.startswith("td3"):
        yield from _train_td3(kind, make_env, cfg, seed, budget, eval_interval, eval_episodes)
    elif kind.startswith("ppo"):
        yield from _train_ppo(kind, make_env, cfg, seed, budget, eval_interval, eval_episodes)
    else:
        yield from _train_qlearning(make_env, cfg, seed, budget, eval_interval, eval_episodes)


def _train_td3(kind, make_env, cfg: Td3Config, seed, budget, eval_interval, eval_episodes):
    max_reward = kind == "td3_max"
    rngs = _spawn(seed, cfg.n_envs + 3)
    envs = [make_env(r) for r in rngs[: cfg.n_envs]]
    act_rng, eval_rng, noise_rng = rngs[cfg.n_envs:]
    space = envs[0].action_space
    r_bar = envs[0].r_bar
    agent = Td3Agent(envs[0].obs_dim, space.dim, space.high, cfg, max_reward, r_bar, seed)
    buffer = ReplayBuffer(min(cfg.buffer_size, budget), envs[0].obs_dim, space.dim)
    noises = [ExplorationNoise(cfg.noise_kind, space.dim, cfg.noise_std * space.high,
                               cfg.noise_clip * space.high, noise_rng) for _ in envs]
    obs = np.stack([e.reset() for e in envs])
    y = np.zeros(cfg.n_envs)
    env_steps, next_eval = 0, eval_interval
    pending = 0.0
    c_loss, a_loss = math.nan, math.nan

    while env_steps < budget:
        if env_steps < cfg.initial_steps:
            actions = np.stack([space.sample(act_rng) for _ in envs])
        else:
            actions = agent.act(obs, y) + np.stack([n.sample() for n in noises])
            actions = np.clip(actions, space.low, space.high)
        for k, env in enumerate(envs):
            o2, r, trunc, info = env.step(actions[k])
            y2 = max(r, y[k]) / cfg.gamma
            buffer.add(obs[k], y[k], actions[k], r, o2, y2, trunc)
            if trunc:
                o2, y2 = env.reset(), 0.0
                noises[k].reset()
            obs[k], y[k] = o2, y2
        env_steps += cfg.n_envs
        if env_steps >= cfg.initial_steps and len(buffer) >= cfg.minibatch_size:
            pending += cfg.updates_per_step
            while pending >= 1.0:
                losses = agent.update(buffer.sample(cfg.minibatch_size, act_rng))
                c_loss = losses.critic
                if losses.actor is not None:
                    a_loss = losses.actor
                pending -= 1.0
        if env_steps >= next_eval or env_steps >= budget:
            ev = evaluate(agent.act, make_env, eval_rng, eval_episodes, cfg.gamma, max_reward)
            yield _row(agent.updates, env_steps, ev, c_loss, a_loss, seed)
            while next_eval <= env_steps:
                next_eval += eval_interval


def _train_ppo(kind, make_env, cfg: PpoConfig, seed, budget, eval_interval, eval_episodes):
    max_reward = kind == "ppo_max"
    rngs = _spawn(seed, cfg.n_envs + 2)
    envs = [make_env(r) for r in rngs[: cfg.n_envs]]
    act_rng, eval_rng = rngs[cfg.n_envs:]
    space = envs[0].action_space
    agent = PpoAgent(envs[0].obs_dim, space, cfg, max_reward, envs[0].r_bar, seed)
    # one episode per environment per iteration, truncated at the task horizon
    T, N = min(cfg.rollout_length, envs[0].t_max), cfg.n_envs
    env_steps, next_eval = 0, eval_interval

    while env_steps < budget:
        obs = np.zeros((T + 1, N, envs[0].obs_dim))
        ys = np.zeros((T + 1, N))
        adim = () if isinstance(space, Discrete) else (space.dim,)
        actions = np.zeros((T, N, *adim))
        logp = np.zeros((T, N))
        rewards = np.zeros((T, N))
        obs[0] = np.stack([e.reset() for e in envs])
        for t in range(T):
            a, lp = agent.act(obs[t], ys[t], act_rng)
            actions[t], logp[t] = a, lp
            for k, env in enumerate(envs):
                o2, r, _, _ = env.step(a[k])
                obs[t + 1, k] = o2
                rewards[t, k] = r
                ys[t + 1, k] = max(r, ys[t, k]) / cfg.gamma
        env_steps += T * N
        losses = agent.learn(obs, ys, actions, logp, rewards)
        if env_steps >= next_eval or env_steps >= budget:
            ev = evaluate(agent.act_greedy, make_env, eval_rng, eval_episodes, cfg.gamma, max_reward)
            yield _row(agent.updates, env_steps, ev, losses.critic, losses.actor, seed)
            while next_eval <= env_steps:
                next_eval += eval_interval


def _train_qlearning(make_env, cfg: QLearningConfig, seed, budget, eval_interval, eval_episodes):
    env_rng, eval_rng = _spawn(seed, 2)
    env = make_env(env_rng)
    agent = TabularQLearner(env.action_space.n, cfg, seed)
    obs = env.reset()
    env_steps, next_eval = 0, eval_interval
    loss = math.nan
    greedy = lambda o, y: np.array([agent.greedy(o[0])])  # noqa: E731
    while env_steps < budget:
        a = agent.act(obs)
        o2, r, trunc, _ = env.step(a)
        loss = agent.update(obs, a, r, o2)
        obs = env.reset() if trunc else o2
        env_steps += 1
        if env_steps >= next_eval or env_steps >= budget:
            ev = evaluate(greedy, make_env, eval_rng, eval_episodes, cfg.gamma, False)
            yield _row(agent.updates, env_steps, ev, loss, math.nan, seed)
            while next_eval <= env_steps:
                next_eval += eval_interval
