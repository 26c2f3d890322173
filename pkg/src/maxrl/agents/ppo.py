"""PPO with max-reward or cumulative advantages.

Rollouts follow the episodic scheme: every iteration each environment is
reset and run for ``rollout_length`` steps.  The max-reward variant uses the
lambda-mixture of ``gamma**n * v(s_{t+n}, y_{t+n})`` as its return and
regresses the critic on ``gamma**(T-t) * v(s_T, y_T)``.  The cumulative
variant uses truncated GAE and drops y from every input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..environments.core import Box, Discrete
from ..neural import (
    Adam,
    Mlp,
    clip_grad_norm,
    log_softmax,
    softmax,
    value_head_transform,
)
from .config import PpoConfig
from .td3 import features

LOG_2PI = np.log(2.0 * np.pi)


class LogStd:
    """State-independent log standard deviation, shaped like an ``Mlp`` for ``Adam``."""

    def __init__(self, dim: int, init: float):
        self.params = [np.full(dim, float(init))]
        self.grads = [np.zeros(dim)]


class PolicyHead:
    """Categorical (discrete) or diagonal Gaussian (continuous) action distribution."""

    def __init__(self, in_dim: int, space, hidden, init_log_std: float, seed: int):
        self.discrete = isinstance(space, Discrete)
        out = space.n if self.discrete else space.dim
        self.net = Mlp([in_dim, *hidden, out], "tanh", seed)
        self.log_std = None if self.discrete else LogStd(out, init_log_std)
        self.space = space

    def dist(self, x):
        return self.net.forward(x)

    def sample(self, x, rng: np.random.Generator):
        out = self.net.forward(x)
        if self.discrete:
            p = softmax(out)
            u = rng.random(len(p))[:, None]
            a = np.minimum((np.cumsum(p, axis=1) < u).sum(axis=1), p.shape[1] - 1)
            return a, log_softmax(out)[np.arange(len(a)), a]
        std = np.exp(self.log_std.params[0])
        a = out + std * rng.standard_normal(out.shape)
        return a, self.gaussian_logp(out, a)

    def mode(self, x):
        out = self.net.forward(x)
        return out.argmax(axis=1) if self.discrete else out

    def gaussian_logp(self, mean, a):
        ls = self.log_std.params[0]
        return np.sum(-0.5 * ((a - mean) / np.exp(ls)) ** 2 - ls - 0.5 * LOG_2PI, axis=1)

    def logp_entropy_grads(self, x, a):
        """Forward pass returning log-probs, entropies and their gradients w.r.t. the head."""
        out = self.net.forward(x)
        n = len(out)
        if self.discrete:
            a = a.astype(int)
            lp = log_softmax(out)
            p = np.exp(lp)
            logp = lp[np.arange(n), a]
            ent = -np.sum(p * lp, axis=1)
            dlogp = -p
            dlogp[np.arange(n), a] += 1.0
            dent = -p * (lp + ent[:, None])
            return logp, ent, dlogp, dent, None, None
        ls = self.log_std.params[0]
        var = np.exp(2.0 * ls)
        logp = self.gaussian_logp(out, a)
        ent = np.full(n, np.sum(ls + 0.5 * (LOG_2PI + 1.0)))
        dlogp = (a - out) / var
        dlogp_ls = (a - out) ** 2 / var - 1.0  # (n, dim)
        dent_ls = np.ones_like(ls)
        return logp, ent, dlogp, np.zeros_like(out), dlogp_ls, dent_ls


class ValueNet:
    def __init__(self, in_dim: int, hidden, max_reward: bool, r_bar: float, seed: int):
        self.net = Mlp([in_dim, *hidden, 1], "tanh", seed)
        self.max_reward = max_reward
        self.r_bar = r_bar
        self._head_grad = None

    def forward(self, x, y) -> np.ndarray:
        u = self.net.forward(x)[:, 0]
        if not self.max_reward:
            self._head_grad = None
            return u
        v, self._head_grad = value_head_transform(u, y, self.r_bar)
        return v

    def backward(self, grad_v):
        g = grad_v if self._head_grad is None else grad_v * self._head_grad
        return self.net.backward(g[:, None])


@dataclass
class PpoLosses:
    critic: float
    actor: float
    entropy: float


def surrogate_coef(ratio, adv, clip: float) -> np.ndarray:
    """d(clipped surrogate)/d(log-prob) per sample: ``ratio * adv`` where the unclipped term is active."""
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    return np.where(unclipped <= clipped, ratio * adv, 0.0)


class PpoAgent:
    def __init__(self, obs_dim: int, space, cfg: PpoConfig, max_reward: bool, r_bar: float,
                 seed: int):
        self.cfg = cfg
        self.max_reward = max_reward
        self.r_bar = r_bar
        self.space = space
        in_dim = obs_dim + (1 if max_reward else 0)
        hidden = tuple(cfg.hidden)
        self.policy = PolicyHead(in_dim, space, hidden, cfg.init_log_std, seed)
        self.value = ValueNet(in_dim, hidden, max_reward, r_bar, seed + 1)
        self.pi_opt = Adam(self.policy.net, cfg.lr)
        self.std_opt = None if self.policy.discrete else Adam(self.policy.log_std, cfg.lr)
        self.v_opt = Adam(self.value.net, cfg.lr)
        self.rng = np.random.default_rng([seed, 11])
        self.updates = 0

    def feats(self, obs, y):
        return features(obs, y, self.max_reward, self.r_bar)

    def act(self, obs, y, rng):
        return self.policy.sample(self.feats(obs, y), rng)

    def act_greedy(self, obs, y):
        a = self.policy.mode(self.feats(obs, y))
        if isinstance(self.space, Box):
            a = self.space.clip(a)
        return a

    def values(self, obs, y) -> np.ndarray:
        return self.value.forward(self.feats(obs, y), y)

    def returns_and_advantages(self, obs, y, rewards):
        """Targets for one rollout of shape (T+1, N) observations and (T, N) rewards."""
        cfg = self.cfg
        T, N = rewards.shape
        V = self.values(obs.reshape((T + 1) * N, -1), y.reshape(-1)).reshape(T + 1, N)
        if self.max_reward:
            G = np.empty((T, N))
            g = cfg.gamma * V[T]
            G[T - 1] = g
            for t in range(T - 2, -1, -1):
                g = cfg.gamma * ((1.0 - cfg.gae_lambda) * V[t + 1] + cfg.gae_lambda * g)
                G[t] = g
            adv = G - V[:-1]
            target = cfg.gamma ** np.arange(T, 0, -1)[:, None] * V[T][None, :]
        else:
            delta = rewards + cfg.gamma * V[1:] - V[:-1]
            adv = np.empty((T, N))
            acc = np.zeros(N)
            for t in range(T - 1, -1, -1):
                acc = delta[t] + cfg.gamma * cfg.gae_lambda * acc
                adv[t] = acc
            target = adv + V[:-1]
        return adv, target

    def actor_grad(self, x, actions, logp_old, adv):
        """Loss and gradients of the clipped surrogate with entropy bonus.

        Leaves parameter gradients in the policy network (and log-std) and
        returns ``(actor_loss, mean_entropy)``.
        """
        cfg = self.cfg
        n = len(adv)
        logp, ent, dlogp, dent, dlogp_ls, dent_ls = self.policy.logp_entropy_grads(x, actions)
        ratio = np.exp(logp - logp_old)
        unclipped = ratio * adv
        clipped = np.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv
        loss = -float(np.mean(np.minimum(unclipped, clipped))) - cfg.entropy_weight * float(np.mean(ent))
        coef = surrogate_coef(ratio, adv, cfg.clip)
        g_out = (-coef[:, None] * dlogp - cfg.entropy_weight * dent) / n
        self.policy.net.backward(g_out)
        if dlogp_ls is not None:
            self.policy.log_std.grads[0] = (
                -(coef[:, None] * dlogp_ls).sum(axis=0) / n - cfg.entropy_weight * dent_ls
            )
        return loss, float(np.mean(ent))

    def update(self, x, y, actions, logp_old, adv, target) -> PpoLosses:
        cfg = self.cfg
        n = len(adv)
        a_loss, ent = self.actor_grad(x, actions, logp_old, adv)
        clip_grad_norm([self.policy.net], cfg.grad_clip)
        self.pi_opt.step()
        if self.std_opt is not None:
            self.std_opt.step()
        v = self.value.forward(x, y)
        err = v - target
        c_loss = float(np.mean(err**2))
        self.value.backward(cfg.value_weight * 2.0 * err / n)
        clip_grad_norm([self.value.net], cfg.grad_clip)
        self.v_opt.step()
        if not (np.isfinite(a_loss) and np.isfinite(c_loss)):
            raise FloatingPointError("PPO loss is not finite")
        self.updates += 1
        return PpoLosses(c_loss, a_loss, ent)

    def learn(self, obs, y, actions, logp_old, rewards) -> PpoLosses:
        """K epochs of shuffled minibatch updates on one rollout.

        Shapes: obs (T+1, N, d), y (T+1, N), actions (T, N[, dim]), logp_old and rewards (T, N).
        """
        cfg = self.cfg
        T, N = rewards.shape
        adv, target = self.returns_and_advantages(obs, y, rewards)
        x = self.feats(obs[:-1].reshape(T * N, -1), y[:-1].reshape(-1))
        yy = y[:-1].reshape(-1)
        acts = actions.reshape(T * N, *actions.shape[2:])
        lp = logp_old.reshape(-1)
        adv = adv.reshape(-1)
        target = target.reshape(-1)
        if cfg.normalize_advantages and adv.size > 1:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        losses = []
        for _ in range(cfg.epochs):
            perm = self.rng.permutation(T * N)
            for start in range(0, T * N, cfg.minibatch_size):
                idx = perm[start:start + cfg.minibatch_size]
                losses.append(self.update(x[idx], yy[idx], acts[idx], lp[idx], adv[idx], target[idx]))
        return PpoLosses(
            float(np.mean([l.critic for l in losses])),
            float(np.mean([l.actor for l in losses])),
            float(np.mean([l.entropy for l in losses])),
        )


def ppo_max_update(agent: PpoAgent, obs, y, actions, logp_old, rewards) -> PpoLosses:
    return agent.learn(obs, y, actions, logp_old, rewards)
