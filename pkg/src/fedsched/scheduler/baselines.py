"""Reference schedulers: greedy time-threshold, random (fedavg), gradient-weighted and ascending."""
from __future__ import annotations

import math

import numpy as np

KINDS = ("greedy", "fedavg", "max_gradient", "ascend")
GREEDY_TIME_LIMIT_S = 3.0


def greedy_estimates(mean_cnr, comp_time_fmax_s, n_active, n_subcarriers, p_max_w, bandwidth_hz,
                     model_bits):
    """Per-user round time if ``n_active`` users split subcarriers and power evenly."""
    share = n_subcarriers / n_active
    rate = share * bandwidth_hz * np.log2(1.0 + (p_max_w / share) * np.asarray(mean_cnr))
    return np.asarray(comp_time_fmax_s) + model_bits / rate


def greedy_schedule(mean_cnr, comp_time_fmax_s, n_subcarriers, p_max_w, bandwidth_hz, model_bits,
                    limit_s=GREEDY_TIME_LIMIT_S):
    n = len(mean_cnr)
    for k in range(n, 0, -1):
        est = greedy_estimates(mean_cnr, comp_time_fmax_s, k, n_subcarriers, p_max_w,
                               bandwidth_hz, model_bits)
        order = np.lexsort((np.arange(n), est))[:k]
        if np.all(est[order] <= limit_s):
            return sorted(int(u) for u in order)
    est = greedy_estimates(mean_cnr, comp_time_fmax_s, 1, n_subcarriers, p_max_w, bandwidth_hz,
                           model_bits)
    return [int(np.lexsort((np.arange(n), est))[0])]


def fedavg_schedule(n_users, rng, k=None):
    k = n_users // 2 if k is None else k
    return sorted(int(u) for u in rng.choice(n_users, size=max(1, k), replace=False))


def max_gradient_schedule(grad_norms, rng, k=None):
    g = np.asarray(grad_norms, dtype=float)
    n = len(g)
    k = max(1, n // 2 if k is None else k)
    w = np.maximum(g, 0.0) + 1e-12
    return sorted(int(u) for u in rng.choice(n, size=k, replace=False, p=w / w.sum()))


def ascend_count(round_index, max_rounds, n_users):
    lo, hi = 0.1 * n_users, 0.9 * n_users
    frac = round_index / (max_rounds - 1) if max_rounds > 1 else 0.5
    return int(min(n_users, max(1, math.floor(lo + (hi - lo) * min(frac, 1.0) + 0.5))))


def ascend_schedule(round_index, max_rounds, n_users, rng):
    k = ascend_count(round_index, max_rounds, n_users)
    return sorted(int(u) for u in rng.choice(n_users, size=k, replace=False))
