"""Small dense networks with hand-written backprop, Adam, and a Beta action head."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.special import digamma, gammaln


class DenseNet:
    """Fully connected net, tanh on hidden layers and a linear output.

    Parameters live in one flat vector ``params``; ``weights[i]`` (in x out) and
    ``biases[i]`` are views into it, so optimisers can update ``params`` in place.
    """

    def __init__(self, layer_sizes, rng=None, params=None):
        self.layer_sizes = [int(s) for s in layer_sizes]
        if len(self.layer_sizes) < 2 or min(self.layer_sizes) < 1:
            raise ValueError("need at least an input and an output layer of positive width")
        self.n_params = sum((a + 1) * b for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))
        if params is None:
            params = np.zeros(self.n_params)
            if rng is not None:
                self._bind(params)
                for w, (fan_in, fan_out) in zip(self.weights, zip(self.layer_sizes, self.layer_sizes[1:])):
                    w[...] = rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(fan_in, fan_out))
        params = np.asarray(params, dtype=float)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {params.shape}")
        self._bind(params)

    def _bind(self, params):
        self.params = params
        self.weights, self.biases = [], []
        off = 0
        for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            self.weights.append(params[off:off + a * b].reshape(a, b))
            off += a * b
            self.biases.append(params[off:off + b])
            off += b

    def set_params(self, params):
        self.params[...] = params

    def _check_input(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.layer_sizes[0]:
            raise ValueError(f"input width {x.shape[-1]} != {self.layer_sizes[0]}")
        return x

    def _forward(self, x):
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            acts.append(h)
        return acts

    def forward(self, x):
        """Accepts a single vector or a batch (rows are samples)."""
        return self._forward(self._check_input(x))[-1]

    def backward(self, x, upstream, return_input_grad=False):
        """Gradient of ``sum(upstream * forward(x))`` with respect to ``params``."""
        x = self._check_input(x)
        acts = self._forward(x)
        g = np.asarray(upstream, dtype=float)
        if g.shape != acts[-1].shape:
            raise ValueError(f"upstream shape {g.shape} != output shape {acts[-1].shape}")
        grad = np.zeros(self.n_params)
        gnet = DenseNet(self.layer_sizes, params=grad)
        batched = x.ndim == 2
        for i in range(len(self.weights) - 1, -1, -1):
            a_in = acts[i]
            if batched:
                gnet.weights[i][...] = a_in.T @ g
                gnet.biases[i][...] = g.sum(axis=0)
            else:
                gnet.weights[i][...] = np.outer(a_in, g)
                gnet.biases[i][...] = g
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (1.0 - a_in ** 2)
        if return_input_grad:
            return grad, g
        return grad


class Adam:
    def __init__(self, n_params, lr=3e-4):
        self.lr = lr
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        new, self.m, self.v = adam_step(params, grads, (self.m, self.v), self.lr, self.t)
        params[...] = new
        if not np.all(np.isfinite(params)):
            raise FloatingPointError("non-finite parameter after optimiser step")


def adam_step(params, grads, moments, lr, t, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns ``(params, m, v)`` without mutating inputs."""
    m, v = moments
    m = beta1 * m + (1.0 - beta1) * grads
    v = beta2 * v + (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    return params - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def beta_logpdf(x, alpha, beta):
    x = np.asarray(x, dtype=float)
    if np.any((x <= 0.0) | (x >= 1.0)):
        raise ValueError("beta_logpdf needs 0 < x < 1")
    log_b = gammaln(alpha) + gammaln(beta) - gammaln(alpha + beta)
    return (alpha - 1.0) * np.log(x) + (beta - 1.0) * np.log1p(-x) - log_b


class BetaHead:
    """Maps raw network outputs ``[alpha_raw..., beta_raw...]`` to Beta concentrations > 1."""

    def __init__(self, n_actions):
        self.n_actions = n_actions

    def params(self, raw):
        raw = np.asarray(raw, dtype=float)
        k = self.n_actions
        return softplus(raw[..., :k]) + 1.0, softplus(raw[..., k:]) + 1.0

    def sample(self, raw, rng):
        a, b = self.params(raw)
        x = rng.beta(a, b)
        # float rounding can still land on the boundary
        return np.clip(x, 1e-12, 1.0 - 1e-12)

    def mean(self, raw):
        a, b = self.params(raw)
        return a / (a + b)

    def log_prob(self, raw, x):
        """Joint log-density over action dimensions (last axis)."""
        a, b = self.params(raw)
        return beta_logpdf(x, a, b).sum(axis=-1)

    def log_prob_grad(self, raw, x):
        """d log_prob / d raw, same shape as ``raw``."""
        raw = np.asarray(raw, dtype=float)
        k = self.n_actions
        a, b = self.params(raw)
        common = digamma(a + b)
        da = np.log(x) - digamma(a) + common
        db = np.log1p(-x) - digamma(b) + common
        return np.concatenate([da * sigmoid(raw[..., :k]), db * sigmoid(raw[..., k:])], axis=-1)

    def entropy(self, raw):
        a, b = self.params(raw)
        log_b = gammaln(a) + gammaln(b) - gammaln(a + b)
        ent = (log_b - (a - 1.0) * digamma(a) - (b - 1.0) * digamma(b)
               + (a + b - 2.0) * digamma(a + b))
        return ent.sum(axis=-1)


def save_params(net: DenseNet, path) -> None:
    """Write ``path`` (flat little-endian float64) and ``path.json`` (layer sizes)."""
    path = Path(path)
    path.write_bytes(np.asarray(net.params, dtype="<f8").tobytes())
    Path(str(path) + ".json").write_text(json.dumps({"layer_sizes": net.layer_sizes}))


def load_params(path) -> DenseNet:
    path = Path(path)
    meta = json.loads(Path(str(path) + ".json").read_text())
    params = np.frombuffer(path.read_bytes(), dtype="<f8").astype(float)
    return DenseNet(meta["layer_sizes"], params=params)
