"""Scheduling MDP: state features, action decoding and reward."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# mean channel gain in dB is mapped linearly from this range onto [-1, 1]
GAIN_DB_RANGE = (-140.0, -60.0)
DIVERGENCE_CLIP = 5.0


@dataclass
class MdpState:
    channel: np.ndarray
    f_min: np.ndarray
    f_max: np.ndarray
    divergence: np.ndarray
    accuracy_gap: float
    energy: np.ndarray

    def flatten(self) -> np.ndarray:
        v = np.concatenate([self.channel, self.f_min, self.f_max, self.divergence,
                            [self.accuracy_gap], self.energy])
        if not np.all(np.isfinite(v)):
            raise FloatingPointError("non-finite state feature")
        return v


def state_dim(n_users: int) -> int:
    return 5 * n_users + 1


def build_state(mean_gain, f_min_hz, f_max_hz, divergence, target_accuracy, accuracy,
                budgets_j, e_max_j, f_ref_hz=None) -> MdpState:
    """Normalised state: gains in dB scaled to [-1, 1], clocks over ``f_ref_hz``
    (default the largest ``f_max``), divergence clipped, energies over ``e_max_j``."""
    lo, hi = GAIN_DB_RANGE
    g_db = 10.0 * np.log10(np.asarray(mean_gain, dtype=float))
    channel = np.clip(2.0 * (g_db - lo) / (hi - lo) - 1.0, -1.0, 1.0)
    f_max_hz = np.asarray(f_max_hz, dtype=float)
    ref = float(np.max(f_max_hz)) if f_ref_hz is None else f_ref_hz
    return MdpState(
        channel=channel,
        f_min=np.asarray(f_min_hz, dtype=float) / ref,
        f_max=f_max_hz / ref,
        divergence=np.minimum(np.asarray(divergence, dtype=float), DIVERGENCE_CLIP),
        accuracy_gap=float(target_accuracy - accuracy),
        energy=np.asarray(budgets_j, dtype=float) / e_max_j,
    )


def queue_length(m_frac: float, n_users: int) -> int:
    return min(n_users, max(1, int(math.floor(m_frac * n_users))))


def decode_action(action, n_users: int) -> list[int]:
    """``action = [m, p_0..p_{N-1}]``: keep the ``max(1, floor(m N))`` highest-``p`` users,
    ties to the lower id."""
    action = np.asarray(action, dtype=float)
    m, p = action[0], action[1:1 + n_users]
    k = queue_length(m, n_users)
    order = np.lexsort((np.arange(n_users), -p))
    return sorted(int(u) for u in order[:k])


def reward(round_time_s: float) -> float:
    if round_time_s < 0:
        raise ValueError("round time must be non-negative")
    return -float(round_time_s)
