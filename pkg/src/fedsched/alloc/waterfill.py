"""Water-filling over one user's subcarriers.

A water level ``theta`` puts ``max(theta - 1/cnr, 0)`` watts on each subcarrier.
The usable level is the smaller of the level exhausting the power cap and the
level at which upload energy ``bits * P / R`` reaches the energy budget.
"""
from __future__ import annotations

import numpy as np

from .. import kernels


def lambert_w(x: float) -> float:
    """Principal branch of the Lambert W function for ``x >= -1/e``."""
    return kernels.lambertw(x, 0)


def power_limited_level(cnr_row, p_max):
    return kernels.power_level(1.0 / np.asarray(cnr_row, dtype=float), p_max)


def energy_limited_level(cnr_row, bits, bandwidth_hz, e_comm):
    """0.0 when no positive power is affordable."""
    return kernels.energy_level(1.0 / np.asarray(cnr_row, dtype=float), bits, bandwidth_hz, e_comm)


def usable_level(cnr_row, p_max, bits, bandwidth_hz, e_comm):
    return kernels.max_level(1.0 / np.asarray(cnr_row, dtype=float), p_max, bits, bandwidth_hz, e_comm)


def level_for_rate(cnr_row, bandwidth_hz, rate_bps):
    return kernels.rate_level(1.0 / np.asarray(cnr_row, dtype=float), bandwidth_hz, rate_bps)


def powers_at(cnr_row, level):
    cnr_row = np.asarray(cnr_row, dtype=float)
    return np.maximum(level - 1.0 / cnr_row, 0.0)


def rate_of(cnr_row, power, bandwidth_hz):
    return float(bandwidth_hz * np.sum(np.log2(1.0 + np.asarray(cnr_row) * np.asarray(power))))
