import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsched import phy
from fedsched.core import UserProfile, load_config, make_profiles, make_rng

from conftest import ROOT


def _profile(d=1e6, c=20.0):
    return UserProfile(0, c, d, 5e8, 3e9, 1.0, 10.0, 0.0)


def test_pathloss_example():
    pl = phy.pathloss_db(10.0, 0.0)
    assert pl == pytest.approx(68.4)
    assert 10 ** (-pl / 10) == pytest.approx(10 ** -6.84, rel=1e-12)


def test_cnr_example(cfg):
    # independent arithmetic: -174 dBm/Hz -> 10**(-20.4) W/Hz
    n0b = 10 ** (-20.4) * 15000.0
    assert cfg.noise_power_w == pytest.approx(5.9716e-17, rel=1e-4)
    cnr = phy.cnr_from_gain(1e-10, cfg)
    assert cnr == pytest.approx(1e-10 / n0b, rel=1e-12)
    assert cnr == pytest.approx(1.6749e6, rel=1e-3)


def test_channel_draw(cfg):
    profs = make_profiles(cfg, make_rng(3, "channel"), 131072.0)
    ch = phy.draw_channel(profs, cfg, make_rng(3, "fading"))
    assert ch.gain.shape == (cfg.n_users, cfg.n_subcarriers)
    assert np.all(ch.gain > 0) and np.all(ch.cnr > 0)
    assert np.allclose(ch.cnr * cfg.noise_power_w, ch.gain, rtol=1e-12, atol=0)
    with pytest.raises(ValueError):
        phy.draw_channel([], cfg, make_rng(3, "fading"))


def test_compute_time_energy():
    assert phy.compute_time(_profile(), 2e9, 8) == pytest.approx(0.08)
    assert phy.compute_energy(_profile(), 2e9, 8, 1e-28) == pytest.approx(0.064)
    unit = UserProfile(0, 1.0, 1.0, 0.5, 2.0, 1.0, 1.0, 0.0)
    assert phy.compute_time(unit, 1.0, 1) == 1.0
    assert phy.compute_time(_profile(), 1e9, 8) == pytest.approx(2 * phy.compute_time(_profile(), 2e9, 8))
    assert phy.compute_energy(_profile(), 2e9, 8, 1e-28) == pytest.approx(4 * phy.compute_energy(_profile(), 1e9, 8, 1e-28))
    with pytest.raises(ValueError):
        phy.compute_time(_profile(), 0.0, 8)
    with pytest.raises(ValueError):
        phy.compute_energy(_profile(), 4e9, 8, 1e-28)


def test_rate_examples():
    assert phy.rate([1.0], [1.0], [True], 15000) == pytest.approx(15000)
    assert phy.rate([1.0, 2.0], [0.0, 0.0], [False, False], 15000) == 0.0
    assert phy.rate([3.0, 3.0], [1.0, 1.0], [True, True], 15000) == pytest.approx(60000)
    with pytest.raises(ValueError):
        phy.rate([1.0], [-0.1], [True], 15000)


def test_comm_time_energy():
    t, e = phy.comm_time_energy(15000.0, [1.0], [True], 51200)
    assert t == pytest.approx(3.413333333333333)
    assert e == pytest.approx(3.413333333333333)
    with pytest.raises(phy.InfeasibleRateError):
        phy.comm_time_energy(0.0, [1.0], [True], 51200)


def test_advance_energy_examples(cfg):
    cfg1 = cfg.replace(n_users=2)
    st0 = phy.EnergyState(np.array([0.5, 0.9]), np.zeros(2))
    new = phy.advance_energy(st0, [0.1, 0.1], None, cfg1, harvested=[0.2, 0.3])
    assert new.budgets_j == pytest.approx([0.6, 1.0])
    with pytest.raises(phy.EnergyContractError):
        phy.advance_energy(st0, [0.6, 0.0], None, cfg1, harvested=[0, 0])


def test_harvest_mean(cfg):
    h = phy.harvest(make_rng(0, "energy"), cfg, 100_000)
    assert abs(h.mean() - 0.2) <= 0.01
    assert np.allclose(h / 0.05, np.round(h / 0.05))


def test_round_time():
    assert phy.round_time([1.2, 2.5]) == 2.5
    assert phy.round_time([0.7]) == 0.7
    with pytest.raises(ValueError):
        phy.round_time([])


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=8), st.randoms())
def test_round_time_permutation(xs, r):
    ys = list(xs)
    r.shuffle(ys)
    assert phy.round_time(xs) == phy.round_time(ys)


@given(st.lists(st.floats(1e-3, 1e7), min_size=1, max_size=6), st.data())
def test_rate_monotone(cnr, data):
    m = len(cnr)
    p = np.array(data.draw(st.lists(st.floats(0, 1), min_size=m, max_size=m)))
    i = data.draw(st.integers(0, m - 1))
    bump = p.copy()
    bump[i] += 0.5
    a = [True] * m
    assert phy.rate(cnr, bump, a, 15000) > phy.rate(cnr, p, a, 15000)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_battery_stays_in_range(seed):
    cfg = load_config(ROOT / "configs" / "default.json")
    rng = np.random.default_rng(seed)
    state = phy.initial_energy(cfg, rng)
    for _ in range(50):
        spent = rng.uniform(0, 1, cfg.n_users) * state.budgets_j
        state = phy.advance_energy(state, spent, rng, cfg)
        assert np.all(state.budgets_j >= 0) and np.all(state.budgets_j <= cfg.e_max_j)
