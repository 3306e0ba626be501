"""Alternating CPU-frequency / communication optimisation for one round."""
from __future__ import annotations

import math

import numpy as np

from .solvers import comm_budgets, finalise, lcra_assign, ldra_solve, lcra_solve, plan_levels
from .types import AllocProblem, EmptyRoundError, InfeasibleRoundError, RoundAllocation
from .waterfill import powers_at, rate_of, usable_level

ROUND_TIME_TOL_S = 1e-4


def cpu_freq_opt(problem: AllocProblem, t_cm_s, e_cm_j):
    """Slowest CPU clocks that keep the current straggler time.

    Returns ``(freq, t_star, infeasible)``; ``infeasible`` flags users whose
    energy left after communication cannot cover computing even at ``f_min``.
    Their frequency is reported as ``f_min``.
    """
    t_cm = np.asarray(t_cm_s, dtype=float)
    spare = problem.budgets_j - np.asarray(e_cm_j, dtype=float)
    cyc = problem.comp_cycles
    with np.errstate(invalid="ignore"):
        f_cap = np.sqrt(np.maximum(spare, 0.0) / (problem.kappa * cyc))
    f_cap = np.minimum(f_cap, problem.f_max_hz)
    infeasible = (spare < 0) | (f_cap < problem.f_min_hz)
    ok = ~infeasible
    if not ok.any():
        return np.full(problem.n_users, problem.f_min_hz), math.inf, infeasible
    t_star = float(np.max(cyc[ok] / f_cap[ok] + t_cm[ok]))
    freq = np.full(problem.n_users, float(problem.f_min_hz))
    freq[ok] = np.clip(cyc[ok] / (t_star - t_cm[ok]), problem.f_min_hz, f_cap[ok])
    return freq, t_star, infeasible


def feasibility_screen(problem: AllocProblem):
    """Split users into (feasible, dropped) id lists: a user is kept when, at ``f_min``,
    its best single subcarrier admits a positive energy-limited water level."""
    e_left = problem.budgets_j - problem.comp_energy(problem.f_min_hz)
    keep, drop = [], []
    for n, uid in enumerate(problem.scheduled):
        m = int(np.argmax(problem.cnr[n]))
        lv = 0.0
        if e_left[n] > 0:
            lv = usable_level(problem.cnr[n, m:m + 1], problem.p_max_w, problem.model_bits,
                              problem.bandwidth_hz, e_left[n])
        (keep if lv > 0 else drop).append(uid)
    return keep, drop


def _initial_freq(problem: AllocProblem):
    # midpoint, lowered so computing leaves at least half the spare energy for upload
    mid = 0.5 * (problem.f_min_hz + problem.f_max_hz)
    e_floor = (problem.model_bits * math.log(2.0) / problem.bandwidth_hz) / problem.cnr.max(axis=1)
    room = np.maximum(0.5 * (problem.budgets_j - e_floor), 0.0)
    cap = np.sqrt(room / (problem.kappa * problem.comp_cycles))
    return np.clip(np.minimum(mid, cap), problem.f_min_hz, problem.f_max_hz)


def _comm_plan(problem, owner, e_cp):
    """Per-user (t_cm, e_cm) of an assignment at the usable levels; inf/inf if a user is starved."""
    e_comm = comm_budgets(problem, e_cp)
    lv = plan_levels(problem, owner, e_comm)
    t_cm = np.full(problem.n_users, math.inf)
    e_cm = np.full(problem.n_users, math.inf)
    for n in range(problem.n_users):
        if lv[n] > 0:
            sel = owner == n
            p = powers_at(problem.cnr[n, sel], lv[n])
            r = rate_of(problem.cnr[n, sel], p, problem.bandwidth_hz)
            t_cm[n] = problem.model_bits / r
            e_cm[n] = p.sum() * t_cm[n]
    return t_cm, e_cm


def _solve_comm(problem, solver, t_cp, e_cp, freq, ldra_kw):
    if solver == "ldra":
        alloc = ldra_solve(problem, t_cp, e_cp, freq=freq, sync=False, **ldra_kw)
        idx = {u: i for i, u in enumerate(problem.scheduled)}
        owner = np.array([idx[u] if u >= 0 else -1 for u in alloc.assignment], dtype=np.int64)
        return owner, np.zeros(problem.n_users, dtype=bool)
    if solver == "lcra":
        owner, dropped = lcra_assign(problem, e_cp)
        return np.asarray(owner, dtype=np.int64), np.asarray(dropped, dtype=bool)
    raise ValueError(f"unknown solver {solver!r}")


def ado_optimize(problem: AllocProblem, max_outer=20, solver="lcra", *, ldra_kw=None,
                 sync=True) -> RoundAllocation:
    """Alternate communication solves and CPU closed forms until the round time settles.

    Users failing the feasibility screen, or dropped by a solver, are removed and
    reported in ``dropped``. The returned allocation's ``history`` holds the round
    time after every CPU step and is non-increasing.
    """
    ldra_kw = dict(ldra_kw or {})
    keep_ids, dropped = feasibility_screen(problem)
    pos = {u: i for i, u in enumerate(problem.scheduled)}
    prob = problem.subset([pos[u] for u in keep_ids])

    while True:
        if prob.n_users == 0:
            raise EmptyRoundError("every scheduled user was dropped")
        try:
            result = _ado_loop(prob, max_outer, solver, ldra_kw, sync)
        except InfeasibleRoundError as exc:
            bad = set(exc.users) & set(prob.scheduled)
            if not bad:
                raise
            dropped.extend(sorted(bad))
            prob = prob.subset([i for i, u in enumerate(prob.scheduled) if u not in bad])
            continue
        alloc, solver_dropped = result
        if solver_dropped:
            dropped.extend(solver_dropped)
            prob = prob.subset([i for i, u in enumerate(prob.scheduled) if u not in solver_dropped])
            continue
        alloc.dropped = sorted(set(dropped))
        return alloc


def _ado_loop(prob: AllocProblem, max_outer, solver, ldra_kw, sync):
    freq = _initial_freq(prob)
    history = []
    owner = None
    t_prev = math.inf
    for _ in range(max_outer):
        t_cp = prob.comp_time(freq)
        e_cp = prob.comp_energy(freq)
        new_owner, dropped = _solve_comm(prob, solver, t_cp, e_cp, freq, ldra_kw)
        if dropped.any():
            return None, [prob.scheduled[n] for n in np.flatnonzero(dropped)]
        t_cm, e_cm = _comm_plan(prob, new_owner, e_cp)
        if owner is not None:
            # keep the incumbent assignment when it is faster at the new clocks
            o_t_cm, o_e_cm = _comm_plan(prob, owner, e_cp)
            if np.max(t_cp + o_t_cm) < np.max(t_cp + t_cm):
                new_owner, t_cm, e_cm = owner, o_t_cm, o_e_cm
        owner = new_owner
        if not np.all(np.isfinite(t_cm)):
            starved = [prob.scheduled[n] for n in np.flatnonzero(~np.isfinite(t_cm))]
            raise InfeasibleRoundError("users left without a usable subcarrier", starved)
        new_freq, t_star, infeasible = cpu_freq_opt(prob, t_cm, e_cm)
        if infeasible.any():
            return None, [prob.scheduled[n] for n in np.flatnonzero(infeasible)]
        freq = new_freq
        history.append(t_star)
        if abs(t_prev - t_star) <= ROUND_TIME_TOL_S:
            break
        t_prev = t_star
    t_cp = prob.comp_time(freq)
    e_cp = prob.comp_energy(freq)
    alloc = finalise(prob, owner, range(prob.n_users), t_cp, e_cp, freq, sync=sync)
    alloc.history = history
    return alloc, []
