"""TD3 on extended states, with max-reward or cumulative critic targets.

Max-reward target: ``z = y' v gamma * min_i q'_i(s', a~, y')``.
Cumulative target: ``z = r + gamma * min_i q'_i(s', a~)``; the y input is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..neural import Adam, Mlp, clip_grad_norm, value_head_transform
from .buffer import Batch
from .config import Td3Config


def features(obs, y, use_y: bool, r_bar: float) -> np.ndarray:
    """Network input: observation, plus y clipped at ``r_bar`` for max-reward agents."""
    obs = np.atleast_2d(obs)
    if not use_y:
        return obs
    y = np.minimum(np.asarray(y, dtype=float).reshape(-1, 1), r_bar)
    return np.concatenate([obs, y], axis=1)


class Critic:
    """q(s, a, y).  Max-reward critics pass the output through the bounded head."""

    def __init__(self, in_dim: int, hidden, max_reward: bool, r_bar: float, seed: int):
        self.net = Mlp([in_dim, *hidden, 1], "relu", seed)
        self.max_reward = max_reward
        self.r_bar = r_bar
        self._head_grad = None

    def forward(self, x, y) -> np.ndarray:
        u = self.net.forward(x)[:, 0]
        if not self.max_reward:
            self._head_grad = None
            return u
        q, self._head_grad = value_head_transform(u, y, self.r_bar)
        return q

    def backward(self, grad_q) -> np.ndarray:
        g = grad_q if self._head_grad is None else grad_q * self._head_grad
        return self.net.backward(g[:, None])

    def copy(self) -> Critic:
        c = Critic.__new__(Critic)
        c.net = self.net.copy()
        c.max_reward, c.r_bar, c._head_grad = self.max_reward, self.r_bar, None
        return c


class Actor:
    """Deterministic policy ``a_max * tanh(net(x))``."""

    def __init__(self, in_dim: int, act_dim: int, hidden, a_max: float, seed: int):
        self.net = Mlp([in_dim, *hidden, act_dim], "relu", seed)
        self.a_max = a_max
        self._t = None

    def forward(self, x) -> np.ndarray:
        self._t = np.tanh(self.net.forward(x))
        return self.a_max * self._t

    def backward(self, grad_a) -> np.ndarray:
        return self.net.backward(grad_a * self.a_max * (1.0 - self._t**2))

    def copy(self) -> Actor:
        a = Actor.__new__(Actor)
        a.net, a.a_max, a._t = self.net.copy(), self.a_max, None
        return a


@dataclass
class Td3Losses:
    critic: float
    actor: float | None


class Td3Agent:
    def __init__(self, obs_dim: int, act_dim: int, a_max: float, cfg: Td3Config,
                 max_reward: bool, r_bar: float, seed: int):
        self.cfg = cfg
        self.max_reward = max_reward
        self.r_bar = r_bar
        self.act_dim = act_dim
        self.a_max = a_max
        in_dim = obs_dim + (1 if max_reward else 0)
        hidden = tuple(cfg.hidden)
        self.actor = Actor(in_dim, act_dim, hidden, a_max, seed)
        self.critics = [Critic(in_dim + act_dim, hidden, max_reward, r_bar, seed + k + 1)
                        for k in range(2)]
        self.actor_target = self.actor.copy()
        self.critic_targets = [c.copy() for c in self.critics]
        self.actor_opt = Adam(self.actor.net, cfg.lr)
        self.critic_opts = [Adam(c.net, cfg.lr) for c in self.critics]
        self.rng = np.random.default_rng([seed, 7])
        self.updates = 0

    def feats(self, obs, y):
        return features(obs, y, self.max_reward, self.r_bar)

    def act(self, obs, y) -> np.ndarray:
        return self.actor.forward(self.feats(obs, y))

    def target(self, batch: Batch) -> np.ndarray:
        cfg = self.cfg
        x_next = self.feats(batch.obs_next, batch.y_next)
        noise = np.clip(cfg.target_noise * self.a_max * self.rng.standard_normal((len(x_next), self.act_dim)),
                        -cfg.target_noise_clip * self.a_max, cfg.target_noise_clip * self.a_max)
        a_next = np.clip(self.actor_target.forward(x_next) + noise, -self.a_max, self.a_max)
        xa = np.concatenate([x_next, a_next], axis=1)
        q_next = np.minimum(*(c.forward(xa, batch.y_next) for c in self.critic_targets))
        if self.max_reward:
            return np.maximum(batch.y_next, cfg.gamma * q_next)
        return batch.reward + cfg.gamma * q_next

    def update(self, batch: Batch) -> Td3Losses:
        """One critic step, and an actor step plus target soft-update every ``policy_update_freq``."""
        cfg = self.cfg
        z = self.target(batch)
        x = self.feats(batch.obs, batch.y)
        xa = np.concatenate([x, batch.action], axis=1)
        n = len(z)
        losses = []
        for critic, opt in zip(self.critics, self.critic_opts):
            q = critic.forward(xa, batch.y)
            err = q - z
            losses.append(float(np.mean(err**2)))
            critic.backward(2.0 * err / n)
            clip_grad_norm([critic.net], cfg.grad_clip)
            opt.step()
        critic_loss = float(np.mean(losses))
        if not np.isfinite(critic_loss):
            raise FloatingPointError("critic loss is not finite")

        self.updates += 1
        actor_loss = None
        if self.updates % cfg.policy_update_freq == 0:
            a = self.actor.forward(x)
            q = self.critics[0].forward(np.concatenate([x, a], axis=1), batch.y)
            actor_loss = -float(np.mean(q))
            g_in = self.critics[0].backward(-np.ones(n) / n)
            self.actor.backward(g_in[:, x.shape[1]:])
            clip_grad_norm([self.actor.net], cfg.grad_clip)
            self.actor_opt.step()
            for c, ct in zip(self.critics, self.critic_targets):
                ct.net.soft_update(c.net, cfg.tau)
            self.actor_target.net.soft_update(self.actor.net, cfg.tau)
        return Td3Losses(critic_loss, actor_loss)


def td3_max_update(agent: Td3Agent, batch: Batch) -> Td3Losses:
    return agent.update(batch)
