import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsched.tinynn import (Adam, BetaHead, DenseNet, adam_step, beta_logpdf, load_params,
                             save_params)


def dense_oracle(net, x):
    h = np.asarray(x, dtype=float)
    n = len(net.weights)
    for i in range(n):
        w, b = net.weights[i], net.biases[i]
        out = np.array([sum(h[r] * w[r, c] for r in range(w.shape[0])) + b[c] for c in range(w.shape[1])])
        h = np.tanh(out) if i < n - 1 else out
    return h


def test_forward_trivial_cases():
    assert np.all(DenseNet([3, 4, 2]).forward(np.ones(3)) == 0)
    net = DenseNet([3, 3])
    net.weights[0][...] = np.eye(3)
    x = np.array([0.5, -1.0, 2.0])
    assert np.array_equal(net.forward(x), x)


def test_forward_matches_oracle():
    rng = np.random.default_rng(0)
    for sizes in ([5, 7, 3], [4, 6, 6, 2], [8, 1]):
        net = DenseNet(sizes, rng=rng)
        net.params += rng.normal(0, 0.1, net.n_params)
        x = rng.normal(size=sizes[0])
        assert np.max(np.abs(net.forward(x) - dense_oracle(net, x))) <= 1e-12
        batch = rng.normal(size=(4, sizes[0]))
        assert np.allclose(net.forward(batch), np.vstack([net.forward(r) for r in batch]), atol=1e-14)


def test_bad_shapes():
    with pytest.raises(ValueError):
        DenseNet([3])
    with pytest.raises(ValueError):
        DenseNet([3, 2]).forward(np.ones(4))
    with pytest.raises(ValueError):
        DenseNet([3, 2]).backward(np.ones(3), np.ones(3))


@pytest.mark.parametrize("sizes", [[6, 5, 3], [11, 64, 64, 18], [4, 8, 1]])
def test_backward_finite_differences(sizes):
    rng = np.random.default_rng(1)
    net = DenseNet(sizes, rng=rng)
    x = rng.normal(size=(3, sizes[0]))
    up = rng.normal(size=(3, sizes[-1]))
    g = net.backward(x, up)

    def f(p):
        return float(np.sum(up * DenseNet(sizes, params=p).forward(x)))

    h = 1e-5
    for i in rng.choice(net.n_params, 30, replace=False):
        e = np.zeros(net.n_params)
        e[i] = h
        fd = (f(net.params + e) - f(net.params - e)) / (2 * h)
        assert abs(fd - g[i]) <= 1e-4 * max(abs(fd), abs(g[i]), 1e-7)


def test_backward_trivial_cases():
    rng = np.random.default_rng(2)
    net = DenseNet([4, 5, 2], rng=rng)
    assert np.all(net.backward(rng.normal(size=4), np.zeros(2)) == 0)
    lin = DenseNet([3, 2], rng=rng)
    x, up = rng.normal(size=3), rng.normal(size=2)
    g = DenseNet([3, 2], params=lin.backward(x, up))
    assert np.allclose(g.weights[0], np.outer(x, up))
    assert np.allclose(g.biases[0], up)


def test_beta_logpdf_examples():
    assert np.allclose(beta_logpdf([0.1, 0.5, 0.9], 1.0, 1.0), 0.0)
    assert beta_logpdf(0.5, 2.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        beta_logpdf(1.0, 2.0, 2.0)


def beta_mass(a, b, n=10_000):
    """Trapezoid over x = sin(t)^2; the integrand in t stays smooth for a, b >= 1, where a
    uniform grid in x loses ~1e-4 to the steep rise near 0 when a is close to 1."""
    t = np.linspace(0, np.pi / 2, n)
    x = np.sin(t[1:-1]) ** 2
    jac = 2 * np.sin(t[1:-1]) * np.cos(t[1:-1])
    f = np.concatenate([[0.0], np.exp(beta_logpdf(x, a, b)) * jac, [0.0]])
    return np.trapezoid(f, t)


def test_beta_normalisation_quadrature():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a, b = rng.uniform(1, 5, 2)
        assert abs(beta_mass(a, b) - 1.0) <= 1e-4


def test_beta_head_grad_and_entropy():
    rng = np.random.default_rng(4)
    head = BetaHead(3)
    raw = rng.normal(size=6)
    x = rng.uniform(0.05, 0.95, 3)
    g = head.log_prob_grad(raw, x)
    h = 1e-6
    for i in range(6):
        e = np.zeros(6)
        e[i] = h
        fd = (head.log_prob(raw + e, x) - head.log_prob(raw - e, x)) / (2 * h)
        assert fd == pytest.approx(g[i], rel=1e-5, abs=1e-8)
    grid = np.linspace(0, 1, 200_001)[1:-1]
    a, b = head.params(raw)
    num = 0.0
    for k in range(3):
        lp = beta_logpdf(grid, a[k], b[k])
        num += -np.trapezoid(np.exp(lp) * lp, grid)
    assert head.entropy(raw) == pytest.approx(num, rel=1e-3)


def test_adam_examples():
    p = np.array([1.0, -2.0])
    new, m, v = adam_step(p, np.zeros(2), (np.zeros(2), np.zeros(2)), 0.1, 1)
    assert np.array_equal(new, p)
    mom = (np.zeros(2), np.zeros(2))
    g = np.array([3.0, -0.5])
    for t in range(1, 2001):
        prev = p
        p, *mom = adam_step(p, g, tuple(mom), 1e-3, t)
    assert np.allclose(np.abs(p - prev), 1e-3, rtol=1e-4)
    a1 = adam_step(p, g, tuple(mom), 1e-3, 5)
    a2 = adam_step(p, g, tuple(mom), 1e-3, 5)
    assert all(np.array_equal(u, w) for u, w in zip(a1, a2))


def test_adam_rejects_non_finite():
    opt = Adam(1, lr=1.0)
    with pytest.raises(FloatingPointError):
        opt.step(np.ones(1), np.array([np.nan]))


def test_save_load_roundtrip(tmp_path):
    net = DenseNet([3, 4, 2], rng=np.random.default_rng(5))
    save_params(net, tmp_path / "net.bin")
    back = load_params(tmp_path / "net.bin")
    assert back.layer_sizes == net.layer_sizes
    assert np.array_equal(back.params, net.params)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**31))
def test_backward_linear_in_upstream(n_in, n_out, seed):
    rng = np.random.default_rng(seed)
    net = DenseNet([n_in, 5, n_out], rng=rng)
    x = rng.normal(size=n_in)
    u1, u2 = rng.normal(size=n_out), rng.normal(size=n_out)
    assert np.allclose(net.backward(x, u1 + u2), net.backward(x, u1) + net.backward(x, u2), atol=1e-12)
