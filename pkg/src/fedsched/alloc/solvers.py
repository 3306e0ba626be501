"""Subcarrier/power solvers for a fixed CPU plan: dual-decomposition (LDRA) and greedy (LCRA)."""
from __future__ import annotations

import math

import numpy as np

from .. import kernels
from .types import (AllocProblem, DualMultipliers, EmptyRoundError, InfeasibleRoundError,
                    RoundAllocation)
from .waterfill import level_for_rate, powers_at, rate_of, usable_level

N_POLISH_STARTS = 8
LN2 = math.log(2.0)


def dual_step_size(iteration: int) -> float:
    """Diminishing subgradient step ``0.1 / sqrt(iteration)`` (iterations count from 1)."""
    return 0.1 / math.sqrt(iteration)


def kkt_power(lam, gam, mu, cnr, *, p_max, bits, bandwidth_hz, e_comm):
    """Power the dual response puts on a subcarrier, clipped to ``[0, p_max]``.

    Multipliers are in the normalised units used by the dual loop: ``mu`` prices
    power relative to ``p_max`` and ``gam`` prices energy relative to ``e_comm``.
    """
    num = lam + gam
    den = LN2 * (mu / p_max + gam * bits / (e_comm * bandwidth_hz))
    if num <= 0:
        return 0.0
    level = num / den if den > 0 else math.inf
    return float(min(max(level - 1.0 / cnr, 0.0), p_max))


def comm_budgets(problem: AllocProblem, e_cp) -> np.ndarray:
    return problem.budgets_j - np.asarray(e_cp, dtype=float)


def plan_levels(problem: AllocProblem, owner, e_comm) -> np.ndarray:
    """Usable water level per local user for an assignment (0 for users owning nothing)."""
    lv = np.zeros(problem.n_users)
    for n in range(problem.n_users):
        sel = owner == n
        if sel.any() and e_comm[n] > 0:
            lv[n] = usable_level(problem.cnr[n, sel], problem.p_max_w, problem.model_bits,
                                 problem.bandwidth_hz, e_comm[n])
    return lv


def plan_round_time(problem, owner, e_comm, t_cp, users) -> float:
    lv = plan_levels(problem, owner, e_comm)
    worst = -math.inf
    for n in users:
        sel = owner == n
        if lv[n] <= 0:
            return math.inf
        r = rate_of(problem.cnr[n, sel], powers_at(problem.cnr[n, sel], lv[n]), problem.bandwidth_hz)
        worst = max(worst, t_cp[n] + problem.model_bits / r)
    return worst


def finalise(problem: AllocProblem, owner, active, t_cp, e_cp, freq, *, sync=True,
             duals=None) -> RoundAllocation:
    """Water-fill every active user at its usable level; optionally lower non-stragglers'
    levels so every user finishes together (never raises power or energy)."""
    owner = np.asarray(owner, dtype=np.int64)
    active = [int(n) for n in active]
    t_cp = np.asarray(t_cp, dtype=float)
    e_comm = comm_budgets(problem, e_cp)
    bits, bw = problem.model_bits, problem.bandwidth_hz
    lv = plan_levels(problem, owner, e_comm)
    power = np.zeros((len(active), problem.n_subcarriers))
    rates = np.zeros(len(active))
    for j, n in enumerate(active):
        sel = owner == n
        if lv[n] <= 0:
            raise InfeasibleRoundError(f"user {problem.scheduled[n]} cannot transmit",
                                       [problem.scheduled[n]])
        power[j, sel] = powers_at(problem.cnr[n, sel], lv[n])
        rates[j] = rate_of(problem.cnr[n, sel], power[j, sel], bw)
    t_star = float(np.max(t_cp[active] + bits / rates))
    if sync:
        for j, n in enumerate(active):
            window = t_star - t_cp[n]
            sel = owner == n
            target = level_for_rate(problem.cnr[n, sel], bw, bits / window)
            if target < lv[n]:
                power[j, sel] = powers_at(problem.cnr[n, sel], target)
                rates[j] = rate_of(problem.cnr[n, sel], power[j, sel], bw)
    t_cm = bits / rates
    e_cm = power.sum(axis=1) * t_cm
    ids = np.array(problem.scheduled)
    assignment = np.where(owner >= 0, ids[np.clip(owner, 0, None)], -1)
    total = t_cp[active] + t_cm
    dropped = [problem.scheduled[n] for n in range(problem.n_users) if n not in set(active)]
    return RoundAllocation(
        users=[problem.scheduled[n] for n in active], assignment=assignment, power_w=power,
        freq_hz=np.asarray(freq, dtype=float)[active], t_cp_s=t_cp[active], t_cm_s=t_cm,
        e_cp_j=np.asarray(e_cp, dtype=float)[active], e_cm_j=e_cm,
        round_time_s=float(np.max(total)), dropped=dropped, duals=duals,
    )


def _freq_from(problem, t_cp, freq):
    if freq is not None:
        return np.asarray(freq, dtype=float)
    return problem.comp_cycles / np.asarray(t_cp, dtype=float)


def lcra_assign(problem: AllocProblem, e_cp):
    """Greedy claiming phase. Returns (owner per subcarrier, -1 if free; dropped mask)."""
    order = np.argsort(-problem.pathloss_db, kind="stable")
    e_comm = comm_budgets(problem, e_cp)
    p_max = np.full(problem.n_users, float(problem.p_max_w))
    return kernels.lcra_phase1(problem.cnr, e_comm, p_max, problem.model_bits,
                               problem.bandwidth_hz, order)


def lcra_solve(problem: AllocProblem, t_cp_s, e_cp_j, *, freq=None, sync=True) -> RoundAllocation:
    owner, dropped = lcra_assign(problem, e_cp_j)
    active = np.flatnonzero(~dropped)
    if active.size == 0:
        raise EmptyRoundError("every scheduled user was dropped")
    return finalise(problem, owner, active, t_cp_s, e_cp_j, _freq_from(problem, t_cp_s, freq),
                    sync=sync)


def _complete(owner, cnr, active):
    """Give each unassigned subcarrier to the active user with the best CNR on it."""
    owner = owner.copy()
    act = np.asarray(active)
    for m in np.flatnonzero(owner < 0):
        owner[m] = act[np.argmax(cnr[act, m])]
    return owner


def ldra_solve(problem: AllocProblem, t_cp_s, e_cp_j, max_iter=500, tol=1e-4, *,
               freq=None, sync=True, polish=True) -> RoundAllocation:
    """Dual subgradient allocation over all subcarriers.

    Each dual iterate is rounded to an integral assignment and water-filled at
    the usable levels; the best feasible iterates (plus the greedy assignment)
    seed a move/swap local search and the fastest result is returned.
    """
    t_cp = np.asarray(t_cp_s, dtype=float)
    e_comm = comm_budgets(problem, e_cp_j)
    p_max = np.full(problem.n_users, float(problem.p_max_w))
    bits, bw = problem.model_bits, problem.bandwidth_hz
    if problem.n_subcarriers < problem.n_users:
        raise InfeasibleRoundError("fewer subcarriers than users", problem.scheduled)
    pool: dict = {}
    best_owner, best_time, it, lam, gam, mu, nu = kernels.ldra_dual(
        problem.cnr, t_cp, np.maximum(e_comm, 1e-300), p_max, bits, bw, problem.pathloss_db,
        max_iter, tol, pool)
    duals = DualMultipliers(lambda_n=lam, gamma_n=gam, mu_n=mu, nu_m=nu, step_index=it)
    starts = [np.array(k, dtype=np.int64)
              for k, _ in sorted(pool.items(), key=lambda kv: kv[1])[:N_POLISH_STARTS]]
    g_owner, g_dropped = lcra_assign(problem, e_cp_j)
    if not g_dropped.any():
        starts.append(_complete(g_owner, problem.cnr, np.arange(problem.n_users)))
    everyone = range(problem.n_users)
    best = None
    best_t = math.inf
    for s in starts:
        if polish:
            s, _ = kernels.local_search(problem.cnr, t_cp, e_comm, p_max, bits, bw, s)
        t = plan_round_time(problem, s, e_comm, t_cp, everyone)
        if t < best_t:
            best, best_t = s, t
    if best is None:
        bad = [problem.scheduled[n] for n in np.flatnonzero(g_dropped)] or list(problem.scheduled)
        raise InfeasibleRoundError("no feasible assignment found", bad)
    return finalise(problem, best, everyone, t_cp, e_cp_j, _freq_from(problem, t_cp, freq),
                    sync=sync, duals=duals)
