"""Wireless channel and device physics: channel draws, rates, time/energy, batteries."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ENERGY_SLACK_J = 1e-9


class InfeasibleRateError(ValueError):
    pass


class EnergyContractError(RuntimeError):
    """A user spent more energy than its budget: the allocator produced an invalid plan."""


@dataclass
class ChannelRealization:
    gain: np.ndarray   # (N, M) linear power gains
    cnr: np.ndarray    # (N, M) gain / (N0 B)

    @property
    def mean_gain(self) -> np.ndarray:
        return self.gain.mean(axis=1)


@dataclass
class EnergyState:
    budgets_j: np.ndarray
    harvested_last_j: np.ndarray


def pathloss_db(distance_m, shadowing_db=0.0):
    return 38.4 + 30.0 * np.log10(distance_m) + shadowing_db


def cnr_from_gain(gain, cfg):
    return np.asarray(gain, dtype=float) / cfg.noise_power_w


def draw_channel(profiles, cfg, rng) -> ChannelRealization:
    if not profiles:
        raise ValueError("profiles must be non-empty")
    pl = np.array([pathloss_db(p.distance_m, p.shadowing_db) for p in profiles])
    large = 10.0 ** (-pl / 10.0)
    fading = rng.exponential(1.0, size=(len(profiles), cfg.n_subcarriers))
    # exponential has support (0, inf) but a float draw of exactly 0 is possible
    fading = np.maximum(fading, np.finfo(float).tiny)
    gain = large[:, None] * fading
    return ChannelRealization(gain=gain, cnr=cnr_from_gain(gain, cfg))


def _check_freq(profile, f_hz):
    if not profile.f_min_hz <= f_hz <= profile.f_max_hz:
        raise ValueError(f"frequency {f_hz} outside [{profile.f_min_hz}, {profile.f_max_hz}]")


def compute_time(profile, f_hz, epochs):
    _check_freq(profile, f_hz)
    return epochs * profile.cycles_per_bit * profile.batch_bits / f_hz


def compute_energy(profile, f_hz, epochs, kappa):
    _check_freq(profile, f_hz)
    return kappa * epochs * f_hz ** 2 * profile.cycles_per_bit * profile.batch_bits


def rate(cnr_row, power, assignment, bandwidth_hz):
    power = np.asarray(power, dtype=float)
    assignment = np.asarray(assignment, dtype=bool)
    if np.any(power < 0):
        raise ValueError("power must be non-negative")
    if np.any(power[~assignment] != 0):
        raise ValueError("power must be zero on unassigned subcarriers")
    cnr_row = np.asarray(cnr_row, dtype=float)
    return float(np.sum(bandwidth_hz * np.log2(1.0 + power[assignment] * cnr_row[assignment])))


def comm_time_energy(rate_bps, power, assignment, model_bits):
    if not rate_bps > 0:
        raise InfeasibleRateError(f"rate must be positive, got {rate_bps}")
    t = model_bits / rate_bps
    p_tot = float(np.sum(np.asarray(power, dtype=float)[np.asarray(assignment, dtype=bool)]))
    return t, p_tot * t


def harvest(rng, cfg, size):
    q = cfg.harvest_quantum_j
    return q * rng.poisson(cfg.eh_mean_j / q, size=size)


def initial_energy(cfg, rng) -> EnergyState:
    lo, hi = cfg.e0_range_j
    return EnergyState(budgets_j=rng.uniform(lo, hi, size=cfg.n_users),
                       harvested_last_j=np.zeros(cfg.n_users))


def advance_energy(state: EnergyState, spent_j, rng, cfg, harvested=None) -> EnergyState:
    spent = np.asarray(spent_j, dtype=float)
    over = spent - state.budgets_j
    if np.any(over > ENERGY_SLACK_J):
        bad = np.flatnonzero(over > ENERGY_SLACK_J).tolist()
        raise EnergyContractError(f"users {bad} overspent their energy budget")
    if harvested is None:
        harvested = harvest(rng, cfg, spent.shape[0])
    harvested = np.asarray(harvested, dtype=float)
    new = np.minimum(state.budgets_j - spent + harvested, cfg.e_max_j)
    # allocator residue can leave -1e-9 J; treat as empty battery
    new = np.maximum(new, 0.0)
    return EnergyState(budgets_j=new, harvested_last_j=harvested)


def round_time(per_user_totals):
    vals = list(per_user_totals)
    if not vals:
        raise ValueError("round_time needs at least one user")
    return max(vals)


def dbm_to_w(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


LN2 = math.log(2.0)
