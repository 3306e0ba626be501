import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsched import _kernels_py, kernels
from fedsched.alloc import (energy_limited_level, lambert_w, level_for_rate, power_limited_level,
                            powers_at, usable_level)
from oracles import energy_of, golden_level, power_of, rate_of

BITS, BW = 51200.0, 15000.0
BACKENDS = [kernels] + ([_kernels_py] if kernels.BACKEND == "cython" else [])


@pytest.mark.parametrize("k", BACKENDS, ids=lambda k: k.__name__)
def test_lambert_w_examples(k):
    assert k.lambertw(0.0) == 0.0
    assert k.lambertw(math.e) == pytest.approx(1.0, abs=1e-15)
    assert k.lambertw(-1 / math.e) == -1.0
    with pytest.raises(ValueError):
        k.lambertw(-0.5)
    with pytest.raises(ValueError):
        k.lambertw(0.5, -1)


def test_lambert_w_principal_wrapper():
    assert lambert_w(math.e) == pytest.approx(1.0)


@pytest.mark.parametrize("branch", [0, -1])
def test_lambert_w_near_branch_point_against_mpmath(branch):
    for d in np.logspace(-16, -1, 60):
        x = -math.exp(-1) + d
        if branch == -1 and x >= 0:
            continue
        w = kernels.lambertw(x, branch)
        ref = float(mpmath.lambertw(mpmath.mpf(x), branch).real)
        assert w == pytest.approx(ref, rel=1e-7, abs=1e-7)


def test_power_level_example():
    # subcarriers with 1/phi = {1, 2} and P = 3: level 3, powers {2, 1}
    lv = power_limited_level([1.0, 0.5], 3.0)
    assert lv == pytest.approx(3.0)
    p = powers_at([1.0, 0.5], lv)
    assert p == pytest.approx([2.0, 1.0])
    assert p.sum() == pytest.approx(3.0)


def test_sync_example():
    # phi = 1, rate 15000 bps over one subcarrier -> level 2, 1 W, finishes at 51200/15000 s
    t_star = 51200.0 / 15000.0
    lv = level_for_rate([1.0], BW, BITS / t_star)
    assert lv == pytest.approx(2.0, rel=1e-12)
    assert powers_at([1.0], lv) == pytest.approx([1.0])
    assert rate_of(lv, np.array([1.0]), BW) == pytest.approx(15000.0)


def test_energy_level_infeasible_below_floor():
    cnr = np.array([1e5, 1e4])
    floor = BITS * math.log(2) / (BW * cnr.max())
    assert energy_limited_level(cnr, BITS, BW, floor * 0.999) == 0.0
    assert energy_limited_level(cnr, BITS, BW, floor * 1.01) > 1 / cnr.max()
    assert usable_level(cnr, 1.0, BITS, BW, 0.0) == 0.0


def _instance(rng, m):
    cnr = 10 ** rng.uniform(2, 7, size=m)
    e = 10 ** rng.uniform(-2.5, 0.5)
    return cnr, e


def test_usable_level_matches_golden_oracle():
    rng = np.random.default_rng(11)
    for _ in range(100):
        cnr, e = _instance(rng, int(rng.integers(1, 9)))
        lv = usable_level(cnr, 1.0, BITS, BW, e)
        ref = golden_level(1 / cnr, 1.0, BITS, BW, e)
        if ref <= (1 / cnr).min() * (1 + 1e-12):
            assert lv == 0.0
        else:
            assert lv == pytest.approx(ref, rel=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e2, 1e7), min_size=1, max_size=8), st.floats(1e-3, 3.0))
def test_energy_level_binds_exactly(cnr, e):
    inv = 1 / np.array(cnr)
    lv = kernels.energy_level(inv, BITS, BW, e)
    if lv == 0.0:
        assert e <= BITS * math.log(2) * inv.min() / BW * (1 + 1e-9)
        return
    used = energy_of(lv, inv, BITS, BW)
    assert used <= e * (1 + 1e-12)
    assert used == pytest.approx(e, rel=1e-9)
    assert energy_of(lv * (1 + 1e-8), inv, BITS, BW) > e


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e2, 1e7), min_size=1, max_size=8), st.floats(0.01, 5.0))
def test_power_level_spends_cap(cnr, p_max):
    inv = 1 / np.array(cnr)
    lv = kernels.power_level(inv, p_max)
    assert power_of(lv, inv) == pytest.approx(p_max, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(1e2, 1e7), min_size=1, max_size=8), st.floats(1.0, 1e6))
def test_rate_level_inverts_rate(cnr, rate):
    inv = 1 / np.array(cnr)
    lv = kernels.rate_level(inv, BW, rate)
    assert rate_of(lv, inv, BW) == pytest.approx(rate, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(1e2, 1e7), min_size=1, max_size=8), st.floats(1e-3, 3.0),
       st.floats(1.01, 3.0))
def test_energy_level_monotone_in_budget(cnr, e, factor):
    inv = 1 / np.array(cnr)
    assert kernels.energy_level(inv, BITS, BW, e * factor) >= kernels.energy_level(inv, BITS, BW, e)
