"""Small fully-connected networks with hand-written backpropagation.

All parameters live in one flat vector (``net.params``); the per-layer
weight and bias arrays are views into it, so optimizers and DP clipping act
on flat gradient vectors.
"""

from __future__ import annotations

import numpy as np

ACTIVATIONS = ("relu", "tanh")


class MlpApproximator:
    """``sizes[0] -> ... -> sizes[-1]`` network; hidden layers use ``activation``, output is linear.

    Weights are stored ``(fan_in, fan_out)`` so a batch forward is ``H @ W + b``.
    """

    def __init__(self, sizes, activation="relu", rng=None, params=None):
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise ValueError("need at least an input and an output layer of positive width")
        if activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        self.sizes = tuple(int(s) for s in sizes)
        self.activation = activation
        self.shapes = [(i, o) for i, o in zip(self.sizes[:-1], self.sizes[1:])]
        self.n_params = sum(i * o + o for i, o in self.shapes)
        self.params = np.zeros(self.n_params)
        self.weights, self.biases = [], []
        offset = 0
        for i, o in self.shapes:
            self.weights.append(self.params[offset:offset + i * o].reshape(i, o))
            offset += i * o
            self.biases.append(self.params[offset:offset + o])
            offset += o
        if params is not None:
            self.params[:] = params
        elif rng is not None:
            self.initialize(rng)

    def initialize(self, rng: np.random.Generator) -> None:
        """He-normal fan-in scaling for rectifiers, Glorot-normal for tanh; zero biases."""
        for W, b in zip(self.weights, self.biases):
            fan_in, fan_out = W.shape
            if self.activation == "relu":
                std = np.sqrt(2.0 / fan_in)
            else:
                std = np.sqrt(2.0 / (fan_in + fan_out))
            W[:] = rng.normal(0.0, std, size=W.shape)
            b[:] = 0.0

    def copy(self) -> "MlpApproximator":
        return MlpApproximator(self.sizes, self.activation, params=self.params.copy())

    def _act(self, z):
        return np.maximum(z, 0.0) if self.activation == "relu" else np.tanh(z)

    def _act_grad(self, z, h):
        return (z > 0).astype(z.dtype) if self.activation == "relu" else 1.0 - h * h

    def forward(self, X) -> np.ndarray:
        h = np.asarray(X, dtype=np.float64)
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            h = z if k == last else self._act(z)
        return h

    def forward_cache(self, X):
        h = np.asarray(X, dtype=np.float64)
        cache = [(None, h)]
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            h = z if k == last else self._act(z)
            cache.append((z, h))
        return h, cache

    def _deltas(self, cache, grad_out):
        """Yield ``(layer, input_activations, delta)`` from the output layer down."""
        delta = np.asarray(grad_out, dtype=np.float64)
        for k in range(len(self.weights) - 1, -1, -1):
            h_in = cache[k][1]
            yield k, h_in, delta
            if k > 0:
                z, h = cache[k]
                delta = (delta @ self.weights[k].T) * self._act_grad(z, h)

    def backward(self, cache, grad_out) -> np.ndarray:
        """Flat gradient of a loss whose derivative w.r.t. the outputs is ``grad_out`` (summed over rows)."""
        grad = np.empty(self.n_params)
        offsets = self._offsets()
        for k, h_in, delta in self._deltas(cache, grad_out):
            w0, b0, b1 = offsets[k]
            grad[w0:b0] = (h_in.T @ delta).ravel()
            grad[b0:b1] = delta.sum(axis=0)
        return grad

    def group_gradients(self, cache, grad_out, n_groups: int) -> np.ndarray:
        """Per-group flat gradients, shape ``(n_groups, n_params)``.

        Rows are split into ``n_groups`` contiguous equal groups and each
        group's contribution to the gradient is summed separately.
        """
        B = np.asarray(grad_out).shape[0]
        if B % n_groups:
            raise ValueError(f"batch of {B} does not split into {n_groups} groups")
        per = B // n_groups
        grads = np.empty((n_groups, self.n_params))
        offsets = self._offsets()
        for k, h_in, delta in self._deltas(cache, grad_out):
            w0, b0, b1 = offsets[k]
            hg = h_in.reshape(n_groups, per, -1)
            dg = delta.reshape(n_groups, per, -1)
            grads[:, w0:b0] = np.einsum("gbi,gbo->gio", hg, dg).reshape(n_groups, -1)
            grads[:, b0:b1] = dg.sum(axis=1)
        return grads

    def _offsets(self):
        out, offset = [], 0
        for i, o in self.shapes:
            out.append((offset, offset + i * o, offset + i * o + o))
            offset += i * o + o
        return out


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        params -= self.lr * grad


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-7):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(kind: str, lr: float):
    if kind == "sgd":
        return SGD(lr)
    if kind == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {kind!r}")


def one_hot(indices, n: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    out = np.zeros((indices.size, n))
    out[np.arange(indices.size), indices] = 1.0
    return out


def squared_loss(targets):
    """Mean over rows of ``0.5 * ||out - target||^2``; returns ``loss(out) -> (value, dL/dout)``."""
    targets = np.asarray(targets, dtype=np.float64)

    def loss(out):
        diff = out - targets
        n = out.shape[0]
        return 0.5 * float(np.sum(diff * diff)) / n, diff / n

    return loss


def gradient_check(net: MlpApproximator, X, loss, step: float = 1e-5, floor: float = 1e-6) -> float:
    """Largest relative gap between backprop and central finite differences.

    Per parameter the gap is ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``.
    """
    out, cache = net.forward_cache(X)
    _, grad_out = loss(out)
    analytic = net.backward(cache, grad_out)
    numeric = np.empty_like(analytic)
    saved = net.params.copy()
    for i in range(net.n_params):
        net.params[i] = saved[i] + step
        up = loss(net.forward(X))[0]
        net.params[i] = saved[i] - step
        down = loss(net.forward(X))[0]
        net.params[i] = saved[i]
        numeric[i] = (up - down) / (2 * step)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))
