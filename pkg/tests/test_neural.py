from __future__ import annotations

import numpy as np
import pytest

from maxrl.agents.ppo import PolicyHead, ValueNet
from maxrl.agents.td3 import Actor, Critic
from maxrl.environments.core import Box, Discrete
from maxrl.neural import Adam, Mlp, clip_grad_norm, log_softmax, softmax, value_head_transform

H = 1e-6
TOL = 1e-4


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.abs(a - b).max() / max(1.0, np.abs(a).max(), np.abs(b).max()))


def fd_param_grad(loss_fn, net: Mlp):
    """Central differences of a scalar loss over the flat parameter vector."""
    flat = net.get_flat()
    g = np.zeros_like(flat)
    for i in range(flat.size):
        for sign in (1.0, -1.0):
            p = flat.copy()
            p[i] += sign * H
            net.set_flat(p)
            g[i] += sign * loss_fn() / (2 * H)
    net.set_flat(flat)
    return g


@pytest.mark.parametrize("activation", ["relu", "tanh"])
def test_mlp_param_and_input_grads(activation):
    rng = np.random.default_rng(0)
    net = Mlp([3, 5, 4, 2], activation, seed=1)
    x = rng.normal(size=(6, 3))
    w = rng.normal(size=(6, 2))
    loss = lambda: float(np.sum(w * net.forward(x)))  # noqa: E731
    loss()
    gx = net.backward(w)
    analytic = net.grad_flat()
    assert rel_err(analytic, fd_param_grad(loss, net)) < TOL
    fd_x = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += H
        xm[idx] -= H
        fd_x[idx] = (np.sum(w * net.forward(xp)) - np.sum(w * net.forward(xm))) / (2 * H)
    assert rel_err(gx, fd_x) < TOL


def test_value_head_transform_grad():
    u = np.linspace(-2, 2, 9)
    y = np.array([0.0, 0.1, 0.9, 0.2, 0.0, 0.7, 0.3, 0.95, 0.5])
    out, grad = value_head_transform(u, y, 1.0)
    assert np.all(out >= y) and np.all(out <= 1.0)
    fd = (value_head_transform(u + H, y, 1.0)[0] - value_head_transform(u - H, y, 1.0)[0]) / (2 * H)
    assert rel_err(grad, fd) < TOL


def test_value_head_examples():
    out, _ = value_head_transform(np.array([0.0]), np.array([0.8]), 1.0)
    assert out[0] == 0.8
    out, _ = value_head_transform(np.array([0.0]), np.array([0.2]), 2.0)
    assert out[0] == pytest.approx(1.0)


@pytest.mark.parametrize("max_reward", [True, False])
def test_critic_grad(max_reward):
    rng = np.random.default_rng(2)
    c = Critic(4, (8,), max_reward, 1.0, seed=3)
    x = rng.normal(size=(5, 4))
    y = rng.uniform(0, 0.4, 5)
    w = rng.normal(size=5)
    loss = lambda: float(np.sum(w * c.forward(x, y)))  # noqa: E731
    loss()
    c.backward(w)
    assert rel_err(c.net.grad_flat(), fd_param_grad(loss, c.net)) < TOL


def test_value_net_grad():
    rng = np.random.default_rng(3)
    v = ValueNet(3, (6, 6), True, 1.0, seed=0)
    x = rng.normal(size=(7, 3))
    y = rng.uniform(0, 0.3, 7)
    w = rng.normal(size=7)
    loss = lambda: float(np.sum(w * v.forward(x, y)))  # noqa: E731
    loss()
    v.backward(w)
    assert rel_err(v.net.grad_flat(), fd_param_grad(loss, v.net)) < TOL


def test_actor_grad():
    rng = np.random.default_rng(4)
    a = Actor(3, 2, (8,), 1.5, seed=0)
    x = rng.normal(size=(4, 3))
    w = rng.normal(size=(4, 2))
    loss = lambda: float(np.sum(w * a.forward(x)))  # noqa: E731
    loss()
    a.backward(w)
    assert rel_err(a.net.grad_flat(), fd_param_grad(loss, a.net)) < TOL


def test_discrete_policy_logp_entropy_grads():
    rng = np.random.default_rng(5)
    head = PolicyHead(3, Discrete(4), (6,), -0.5, seed=0)
    x = rng.normal(size=(5, 3))
    acts = rng.integers(4, size=5)
    wl, we = rng.normal(size=5), rng.normal(size=5)

    def loss():
        lp = log_softmax(head.net.forward(x))
        ent = -np.sum(np.exp(lp) * lp, axis=1)
        return float(np.sum(wl * lp[np.arange(5), acts] + we * ent))

    _, _, dlogp, dent, _, _ = head.logp_entropy_grads(x, acts)
    head.net.backward(wl[:, None] * dlogp + we[:, None] * dent)
    assert rel_err(head.net.grad_flat(), fd_param_grad(loss, head.net)) < TOL


def test_gaussian_policy_grads_including_log_std():
    rng = np.random.default_rng(6)
    head = PolicyHead(3, Box(-1.0, 1.0, 2), (6,), -0.3, seed=0)
    x = rng.normal(size=(5, 3))
    acts = rng.normal(size=(5, 2))
    w = rng.normal(size=5)

    def loss():
        return float(np.sum(w * head.gaussian_logp(head.net.forward(x), acts)))

    _, _, dlogp, _, dlogp_ls, dent_ls = head.logp_entropy_grads(x, acts)
    head.net.backward(w[:, None] * dlogp)
    assert rel_err(head.net.grad_flat(), fd_param_grad(loss, head.net)) < TOL
    ls = head.log_std.params[0]
    fd = np.zeros_like(ls)
    for i in range(ls.size):
        ls[i] += H
        up = loss()
        ls[i] -= 2 * H
        down = loss()
        ls[i] += H
        fd[i] = (up - down) / (2 * H)
    assert rel_err((w[:, None] * dlogp_ls).sum(axis=0), fd) < TOL
    np.testing.assert_array_equal(dent_ls, 1.0)


def test_softmax_is_stable():
    z = np.array([[1000.0, 1000.0, -1000.0]])
    np.testing.assert_allclose(softmax(z), [[0.5, 0.5, 0.0]])
    np.testing.assert_allclose(log_softmax(z)[0, :2], np.log(0.5))


def test_save_load_round_trip(tmp_path):
    net = Mlp([2, 3, 1], "tanh", seed=7)
    path = tmp_path / "net.bin"
    net.save(path)
    back = Mlp.load(path)
    x = np.random.default_rng(0).normal(size=(4, 2))
    np.testing.assert_array_equal(back.forward(x), net.forward(x))
    assert back.sizes == net.sizes and back.activation == "tanh"


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"hello world\n")
    with pytest.raises(ValueError):
        Mlp.load(path)


def test_adam_refuses_nan_gradient():
    net = Mlp([1, 2, 1], seed=0)
    opt = Adam(net, 1e-3)
    before = net.get_flat()
    net.grads[0][0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        opt.step()
    np.testing.assert_array_equal(net.get_flat(), before)


def test_adam_fits_a_line():
    rng = np.random.default_rng(0)
    net = Mlp([1, 16, 1], "tanh", seed=0)
    opt = Adam(net, 1e-2)
    x = rng.uniform(-1, 1, (64, 1))
    target = 0.5 * x - 0.2
    for _ in range(500):
        err = net.forward(x) - target
        net.backward(2 * err / len(x))
        opt.step()
    assert float(np.mean((net.forward(x) - target) ** 2)) < 1e-3


def test_clip_grad_norm():
    net = Mlp([2, 2], seed=0)
    net.grads[0][...] = 3.0
    net.grads[1][...] = 0.0
    norm = clip_grad_norm([net], 1.0)
    assert norm == pytest.approx(6.0)
    assert np.sqrt(np.sum(net.grad_flat() ** 2)) == pytest.approx(1.0)


def test_soft_update_and_copy():
    a = Mlp([2, 2], seed=0)
    b = Mlp([2, 2], seed=1)
    c = a.copy()
    c.soft_update(b, 1.0)
    np.testing.assert_array_equal(c.get_flat(), b.get_flat())
    assert not np.array_equal(a.get_flat(), b.get_flat())


def test_bad_activation_and_input_dim():
    with pytest.raises(ValueError):
        Mlp([1, 1], "sigmoid")
    with pytest.raises(ValueError):
        Mlp([3, 1]).forward(np.zeros((2, 2)))
