import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsched.scheduler import baselines
from fedsched.scheduler.mdp import build_state, decode_action, queue_length, reward, state_dim
from fedsched.scheduler.ppo import PpoAgent, PpoBuffer, PpoHyper, Transition, gae
from fedsched.tinynn import BetaHead


def test_state_examples():
    n = 20
    s = build_state(np.full(n, 1e-10), np.full(n, 5e8), np.full(n, 3e9), np.zeros(n), 0.92, 0.92,
                    np.full(n, 0.5), 1.0)
    assert np.all(s.divergence == 0)
    assert s.accuracy_gap == 0
    v = s.flatten()
    assert len(v) == state_dim(n) == 101
    assert np.all(np.abs(s.channel) <= 1)


def test_decode_examples():
    assert queue_length(0.37, 20) == 7
    assert decode_action([0.7, 0.9, 0.1, 0.5], 3) == [0, 2]
    assert decode_action([1e-9, 0.1, 0.2, 0.3], 3) == [2]
    assert decode_action([0.999, 0.5, 0.5, 0.5], 3) == [0, 1]


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**31))
def test_decode_size_bounds(n, seed):
    a = np.random.default_rng(seed).uniform(1e-12, 1 - 1e-12, n + 1)
    users = decode_action(a, n)
    assert 1 <= len(users) <= n
    assert len(set(users)) == len(users)


def test_reward_examples():
    assert reward(2.5) == -2.5
    assert reward(0.0) == 0.0
    assert reward(3.0) < reward(1.0)
    with pytest.raises(ValueError):
        reward(-1.0)


def test_actions_interior_and_seeded():
    agent = PpoAgent(11, 3, np.random.default_rng(0))
    s = np.random.default_rng(1).normal(size=11)
    a1 = agent.act(s, np.random.default_rng(5))
    a2 = agent.act(s, np.random.default_rng(5))
    assert np.array_equal(a1[0], a2[0]) and a1[1] == a2[1]
    assert np.all((a1[0] > 0) & (a1[0] < 1))


def test_uniform_head_is_uniform():
    head = BetaHead(1)
    raw = np.array([-60.0, -60.0])  # softplus ~ 0 so both concentrations are 1
    draws = head.sample(np.tile(raw, (10_000, 1)), np.random.default_rng(0))
    assert abs(draws.mean() - 0.5) <= 0.015
    assert head.log_prob(raw, draws[:5]) == pytest.approx(np.zeros(5), abs=1e-12)


def test_gae_reduces_to_return_to_go():
    r = np.array([1.0, -2.0, 3.0, 0.5, 4.0])
    done = [False, False, True, False, True]
    adv, ret = gae(r, np.zeros(5), done, 1.0, 1.0)
    assert np.allclose(adv, [2.0, 1.0, 3.0, 4.5, 4.0])
    assert np.allclose(ret, adv)


def test_gae_one_step():
    adv, _ = gae([1.0], [0.5], [False], 0.9, 0.95, last_value=2.0)
    assert adv[0] == pytest.approx(1.0 + 0.9 * 2.0 - 0.5)


def test_ratio_identity_surrogate_equals_mean_advantage():
    rng = np.random.default_rng(2)
    agent = PpoAgent(4, 2, rng)
    s = rng.normal(size=(32, 4))
    raw = agent.actor.forward(s)
    a = agent.head.sample(raw, rng)
    lp = agent.head.log_prob(raw, a)
    adv = rng.normal(size=32)
    actor_loss, _ = agent._step(s, a, lp, adv, np.zeros(32))
    assert actor_loss == pytest.approx(-adv.mean(), rel=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_bandit_converges_to_optimum(seed):
    rng = np.random.default_rng(seed)
    agent = PpoAgent(1, 1, rng, PpoHyper(capacity=64))
    s = np.zeros(1)
    for _ in range(200):
        while not agent.buffer.full:
            a, lp, v = agent.act(s, rng)
            agent.buffer.add(Transition(s, a, lp, -abs(a[0] - 0.7), v, True))
        assert agent.maybe_update() is not None
    assert agent.act_mean(s)[0] == pytest.approx(0.7, abs=0.05)


def test_buffer_discipline():
    buf = PpoBuffer(3)
    agent = PpoAgent(2, 1, np.random.default_rng(0), PpoHyper(capacity=3))
    assert agent.maybe_update() is None
    t = Transition(np.zeros(2), np.array([0.5]), 0.0, -1.0, 0.0, False)
    for _ in range(3):
        buf.add(t)
    assert buf.full and len(buf) == 3
    buf.clear()
    assert len(buf) == 0


def test_update_rolls_back_on_non_finite():
    rng = np.random.default_rng(3)
    agent = PpoAgent(2, 1, rng, PpoHyper(capacity=4))
    before = agent.actor.params.copy()
    for i in range(4):
        a, lp, v = agent.act(np.ones(2), rng)
        agent.buffer.add(Transition(np.ones(2), a, lp, float("nan"), v, i == 3))
    stats = agent.update()
    assert stats.get("aborted")
    assert np.array_equal(agent.actor.params, before)
    assert len(agent.buffer) == 0


def test_agent_save_load(tmp_path):
    agent = PpoAgent(6, 3, np.random.default_rng(4))
    agent.save(tmp_path / "snap")
    back = PpoAgent.load(tmp_path / "snap")
    s = np.random.default_rng(5).normal(size=6)
    assert np.array_equal(back.act_mean(s), agent.act_mean(s))
    assert back.value(s) == agent.value(s)


def test_fedavg_selection_frequency():
    rng = np.random.default_rng(6)
    counts = np.zeros(20)
    for _ in range(10_000):
        counts[baselines.fedavg_schedule(20, rng)] += 1
    assert np.all(np.abs(counts / 10_000 - 0.5) <= 0.02)


def test_ascend_ramp():
    assert baselines.ascend_count(100, 201, 20) == 10
    assert baselines.ascend_count(0, 200, 20) == 2
    assert baselines.ascend_count(199, 200, 20) == 18
    assert len(baselines.ascend_schedule(100, 201, 20, np.random.default_rng(0))) == 10


def test_greedy_clamps_to_single_fastest():
    cnr = np.array([1e4, 1e6, 1e5])
    slow = np.array([10.0, 5.0, 4.0])
    assert baselines.greedy_schedule(cnr, slow, 16, 1.0, 15000.0, 51200.0) == [2]
    fast = np.full(3, 0.01)
    assert baselines.greedy_schedule(cnr, fast, 16, 1.0, 15000.0, 51200.0) == [0, 1, 2]


def test_max_gradient_prefers_large_gradients():
    rng = np.random.default_rng(7)
    g = np.array([10.0, 10.0, 0.01, 0.01])
    hits = sum(set(baselines.max_gradient_schedule(g, rng)) == {0, 1} for _ in range(200))
    assert hits > 190
