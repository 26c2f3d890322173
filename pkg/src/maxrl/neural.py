"""Dense networks with hand-written backprop, Adam, and the bounded value head."""

from __future__ import annotations

from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "tanh")
HEADER_MAGIC = "maxrl-mlp/1"


class Mlp:
    """Fully connected network, affine output layer, batch-first inputs.

    ``forward`` caches the activations that ``backward`` needs; ``backward``
    writes parameter gradients into ``grads`` (overwriting) and returns the
    gradient with respect to the input.
    """

    def __init__(self, sizes, activation: str = "relu", seed: int = 0):
        if activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        self.sizes = [int(n) for n in sizes]
        self.activation = activation
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes, self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.params.append(rng.uniform(-bound, bound, size=fan_out))
        self.grads = [np.zeros_like(p) for p in self.params]
        self._cache = None

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def _act(self, z):
        return np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)

    def _act_grad(self, z, a):
        return (z > 0).astype(float) if self.activation == "relu" else 1.0 - a * a

    def forward(self, x) -> np.ndarray:
        h = np.atleast_2d(np.asarray(x, dtype=float))
        if h.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input dim {self.sizes[0]}, got {h.shape[1]}")
        cache = [h]
        for k in range(self.n_layers):
            W, b = self.params[2 * k], self.params[2 * k + 1]
            z = h @ W + b
            if k < self.n_layers - 1:
                h = self._act(z)
                cache.append((z, h))
            else:
                h = z
        self._cache = cache
        return h

    __call__ = forward

    def backward(self, grad_out) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        g = np.atleast_2d(np.asarray(grad_out, dtype=float))
        cache = self._cache
        for k in reversed(range(self.n_layers)):
            h_in = cache[0] if k == 0 else cache[k][1]
            W = self.params[2 * k]
            self.grads[2 * k] = h_in.T @ g
            self.grads[2 * k + 1] = g.sum(axis=0)
            g = g @ W.T
            if k > 0:
                z, a = cache[k]
                g = g * self._act_grad(z, a)
        return g

    def zero_grad(self):
        for g in self.grads:
            g.fill(0.0)

    # -- flat views --------------------------------------------------------
    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat) -> None:
        flat = np.asarray(flat, dtype=float)
        k = 0
        for p in self.params:
            p[...] = flat[k:k + p.size].reshape(p.shape)
            k += p.size

    def grad_flat(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.grads])

    def copy(self) -> Mlp:
        clone = Mlp.__new__(Mlp)
        clone.sizes = list(self.sizes)
        clone.activation = self.activation
        clone.seed = self.seed
        clone.params = [p.copy() for p in self.params]
        clone.grads = [np.zeros_like(p) for p in self.params]
        clone._cache = None
        return clone

    def soft_update(self, source: Mlp, tau: float) -> None:
        for p, q in zip(self.params, source.params):
            p *= 1.0 - tau
            p += tau * q

    # -- checkpoints -------------------------------------------------------
    def save(self, path: str | Path) -> None:
        """Text header line followed by the little-endian float64 parameter blob."""
        flat = self.get_flat()
        header = (
            f"{HEADER_MAGIC} sizes={','.join(map(str, self.sizes))} "
            f"activation={self.activation} seed={self.seed} n_params={flat.size}\n"
        )
        with open(path, "wb") as fh:
            fh.write(header.encode("ascii"))
            fh.write(flat.astype("<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> Mlp:
        data = Path(path).read_bytes()
        nl = data.index(b"\n")
        fields = data[:nl].decode("ascii").split()
        if fields[0] != HEADER_MAGIC:
            raise ValueError(f"not a network checkpoint: {path}")
        meta = dict(f.split("=", 1) for f in fields[1:])
        net = cls([int(n) for n in meta["sizes"].split(",")], meta["activation"], int(meta["seed"]))
        flat = np.frombuffer(data[nl + 1:], dtype="<f8")
        if flat.size != int(meta["n_params"]):
            raise ValueError("checkpoint blob size does not match its header")
        net.set_flat(flat)
        return net


def clip_grad_norm(nets, max_norm: float) -> float:
    grads = [g for net in nets for g in net.grads]
    norm = float(np.sqrt(sum(np.sum(g * g) for g in grads)))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for g in grads:
            g *= scale
    return norm


class Adam:
    def __init__(self, net: Mlp, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.net = net
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in net.params]
        self.v = [np.zeros_like(p) for p in net.params]
        self.t = 0

    def step(self) -> None:
        for g in self.net.grads:
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient; aborting update")
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(self.net.params, self.net.grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        for p in self.net.params:
            if not np.all(np.isfinite(p)):
                raise FloatingPointError("non-finite parameter after update")


def adam_step(net: Mlp, opt: Adam) -> Mlp:
    opt.step()
    return net


def value_head_transform(u_raw, y, r_bar: float):
    """Bound the raw output to ``[0, r_bar]`` with tanh, then lift it to at least y.

    Returns ``(value, d value / d u_raw)``; at ``u == y`` the pass-through
    branch is taken.
    """
    t = np.tanh(u_raw)
    u = r_bar * (t + 1.0) / 2.0
    y = np.asarray(y, dtype=float)
    out = np.maximum(u - y, 0.0) + y
    grad = np.where(u >= y, r_bar * (1.0 - t * t) / 2.0, 0.0)
    return out, grad


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
