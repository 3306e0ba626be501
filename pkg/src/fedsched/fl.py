"""Federated learning on a synthetic Gaussian-cluster classification task."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tinynn import DenseNet

N_CLASSES = 10
N_FEATURES = 32
TEST_FRACTION = 0.2
MAX_BATCH = 64
BITS_PER_VALUE = 64
# norm of every class mean (means are mutually orthogonal); tuned so the default
# target accuracy takes tens of rounds but is reachable under partial participation
CLASS_SEPARATION = 3.3


class DivergenceError(FloatingPointError):
    def __init__(self, message, epoch):
        super().__init__(message)
        self.epoch = epoch


@dataclass
class SyntheticDataset:
    features: np.ndarray
    labels: np.ndarray
    shards: list
    test_features: np.ndarray
    test_labels: np.ndarray
    n_classes: int = N_CLASSES
    dominant: np.ndarray | None = None

    @property
    def shard_sizes(self) -> np.ndarray:
        return np.array([len(s) for s in self.shards])

    def user_data(self, n):
        idx = self.shards[n]
        return self.features[idx], self.labels[idx]


def _class_means(rng, n_classes, n_features, separation):
    # equal pairwise distances keep task difficulty independent of the seed
    q, _ = np.linalg.qr(rng.normal(size=(n_features, n_classes)))
    return separation * q.T


def _draw(rng, means, labels):
    return means[labels] + rng.normal(size=(labels.shape[0], means.shape[1]))


def generate_noniid(cfg, rng, *, n_classes=N_CLASSES, n_features=N_FEATURES,
                    separation=CLASS_SEPARATION) -> SyntheticDataset:
    """Per-user shards where a fraction ``noniid_ratio`` of each shard comes from one
    dominant class (assigned round-robin); the rest is uniform over the other classes.
    With ratio 0 the whole shard is uniform over all classes."""
    means = _class_means(rng, n_classes, n_features, separation)
    lo, hi = cfg.samples_range
    sizes = rng.integers(lo, hi + 1, size=cfg.n_users)
    labels, shards, dominant = [], [], np.arange(cfg.n_users) % n_classes
    start = 0
    for n, d in enumerate(sizes):
        n_dom = int(np.floor(cfg.noniid_ratio * d))
        if n_dom == 0:
            rest = rng.integers(0, n_classes, size=d)
        else:
            others = np.delete(np.arange(n_classes), dominant[n])
            rest = rng.choice(others, size=d - n_dom)
        lab = np.concatenate([np.full(n_dom, dominant[n]), rest]).astype(np.int64)
        labels.append(lab)
        shards.append(np.arange(start, start + d))
        start += d
    labels = np.concatenate(labels)
    feats = _draw(rng, means, labels)
    # held-out split is TEST_FRACTION of all samples, balanced over classes
    n_test = int(round(start * TEST_FRACTION / (1.0 - TEST_FRACTION)))
    test_labels = np.arange(n_test) % n_classes
    test_feats = _draw(rng, means, test_labels)
    return SyntheticDataset(feats, labels, shards, test_feats, test_labels, n_classes, dominant)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class LogisticModel:
    """Multinomial logistic regression; parameters are ``[W.ravel(), b]``."""

    def __init__(self, n_features=N_FEATURES, n_classes=N_CLASSES):
        self.n_features = n_features
        self.n_classes = n_classes
        self.n_params = (n_features + 1) * n_classes

    def init(self, rng):
        return rng.normal(0.0, 0.01, size=self.n_params)

    def _split(self, w):
        k = self.n_features * self.n_classes
        return w[:k].reshape(self.n_features, self.n_classes), w[k:]

    def scores(self, w, x):
        wm, b = self._split(w)
        return x @ wm + b

    def loss(self, w, x, y):
        p = _softmax(self.scores(w, x))
        return float(-np.mean(np.log(p[np.arange(len(y)), y] + 1e-300)))

    def grad(self, w, x, y):
        p = _softmax(self.scores(w, x))
        p[np.arange(len(y)), y] -= 1.0
        p /= len(y)
        return np.concatenate([(x.T @ p).ravel(), p.sum(axis=0)])


class MLPModel:
    """One tanh hidden layer with softmax cross-entropy."""

    def __init__(self, n_features=N_FEATURES, n_classes=N_CLASSES, hidden=32):
        self.net = DenseNet([n_features, hidden, n_classes])
        self.n_params = self.net.n_params

    def init(self, rng):
        return DenseNet(self.net.layer_sizes, rng=rng).params.copy()

    def scores(self, w, x):
        self.net.set_params(w)
        return self.net.forward(x)

    def loss(self, w, x, y):
        p = _softmax(self.scores(w, x))
        return float(-np.mean(np.log(p[np.arange(len(y)), y] + 1e-300)))

    def grad(self, w, x, y):
        p = _softmax(self.scores(w, x))
        p[np.arange(len(y)), y] -= 1.0
        return self.net.backward(x, p / len(y))


def make_model(name="logreg"):
    if name == "logreg":
        return LogisticModel()
    if name == "mlp":
        return MLPModel()
    raise ValueError(f"unknown model {name!r}")


def batch_size_for(shard_len: int) -> int:
    return min(MAX_BATCH, int(shard_len))


def batch_bits(batch_size: int, n_features=N_FEATURES) -> float:
    return float(batch_size * n_features * BITS_PER_VALUE)


def _sgd(model, start, x, y, epochs, lr, batch_size, rng):
    if lr < 0:
        raise ValueError("lr must be non-negative")
    if len(y) == 0:
        raise ValueError("empty shard")
    if not 1 <= batch_size <= len(y):
        raise ValueError("batch_size must lie in [1, shard size]")
    w = np.array(start, dtype=float)
    g = np.zeros_like(w)
    for epoch in range(epochs):
        idx = rng.choice(len(y), size=batch_size, replace=False)
        g = model.grad(w, x[idx], y[idx])
        w -= lr * g
        if not np.all(np.isfinite(w)):
            raise DivergenceError(f"non-finite weights after epoch {epoch}", epoch)
    return w, g


def local_update(model, start, x, y, epochs, lr, batch_size, rng):
    """``epochs`` mini-batch SGD steps from ``start``, one fresh batch per step."""
    return _sgd(model, start, x, y, epochs, lr, batch_size, rng)[0]


def aggregate(models):
    """Plain mean of the local models (no sample-size weighting)."""
    if len(models) == 0:
        raise ValueError("need at least one model")
    n = len(models[0])
    if any(len(m) != n for m in models):
        raise ValueError("models have different lengths")
    return np.mean(np.vstack(models), axis=0)


def divergence_entry(local, global_model) -> float:
    g = np.linalg.norm(global_model)
    if g == 0:
        raise ValueError("global model has zero norm")
    return float(np.linalg.norm(np.asarray(local) - np.asarray(global_model)) / g)


def evaluate_accuracy(model, w, dataset: SyntheticDataset) -> float:
    pred = np.argmax(model.scores(w, dataset.test_features), axis=1)
    return float(np.mean(pred == dataset.test_labels))


def sample_weights(dataset: SyntheticDataset) -> np.ndarray:
    d = dataset.shard_sizes.astype(float)
    return d / d.sum()


def full_gradients(model, w, dataset: SyntheticDataset) -> np.ndarray:
    """Row n is the gradient of user n's full-shard loss."""
    return np.vstack([model.grad(w, *dataset.user_data(n)) for n in range(len(dataset.shards))])


def gradient_gaps(grads, q) -> np.ndarray:
    """Squared distance of each user's gradient from the ``q``-weighted global gradient."""
    glob = q @ grads
    return np.sum((grads - glob) ** 2, axis=1)


def selection_bias_rho(scheduled, grad_gaps, q):
    """Scheduled-set mean gap over the ``q``-weighted population gap; None when undefined."""
    grad_gaps = np.asarray(grad_gaps, dtype=float)
    denom = float(np.dot(q, grad_gaps))
    if denom <= 0 or len(scheduled) == 0:
        return None
    return float(np.mean(grad_gaps[list(scheduled)]) / denom)


@dataclass
class FlRoundOutcome:
    updated_models: dict
    divergence: np.ndarray
    accuracy: float
    grad_norms: np.ndarray
    rho: float | None = None
    grad_max_sq: float | None = None


@dataclass
class FederatedTask:
    """Global model plus the per-user state the scheduler observes."""
    model: object
    dataset: SyntheticDataset
    weights: np.ndarray
    local_epochs: int
    lr0: float = 0.1
    round_index: int = 0
    divergence: np.ndarray = field(default=None)
    grad_norms: np.ndarray = field(default=None)
    accuracy: float = 0.0

    @classmethod
    def create(cls, cfg, dataset, rng):
        model = make_model(cfg.model)
        n = len(dataset.shards)
        task = cls(model=model, dataset=dataset, weights=model.init(rng),
                   local_epochs=cfg.local_epochs, lr0=cfg.lr0,
                   divergence=np.zeros(n), grad_norms=np.ones(n))
        task.accuracy = evaluate_accuracy(model, task.weights, dataset)
        return task

    @property
    def lr(self) -> float:
        return self.lr0 / (1.0 + self.round_index / 50.0)

    def run_round(self, users, rng, diagnostics=False) -> FlRoundOutcome:
        """Local training on ``users`` then aggregation; unscheduled entries stay as they were."""
        users = list(users)
        w0 = self.weights
        local = {}
        diag_rho = diag_g = None
        if diagnostics:
            grads = full_gradients(self.model, w0, self.dataset)
            q = sample_weights(self.dataset)
            diag_rho = selection_bias_rho(users, gradient_gaps(grads, q), q)
            diag_g = float(np.max(np.sum(grads[users] ** 2, axis=1))) if users else None
        for n in users:
            x, y = self.dataset.user_data(n)
            w, g = _sgd(self.model, w0, x, y, self.local_epochs, self.lr, batch_size_for(len(y)), rng)
            local[n] = w
            self.grad_norms[n] = float(np.linalg.norm(g))
        if local:
            self.weights = aggregate([local[n] for n in users])
            for n in users:
                self.divergence[n] = divergence_entry(local[n], w0)
        self.round_index += 1
        self.accuracy = evaluate_accuracy(self.model, self.weights, self.dataset)
        return FlRoundOutcome(local, self.divergence.copy(), self.accuracy, self.grad_norms.copy(),
                              diag_rho, diag_g)
