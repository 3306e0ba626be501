"""Per-round allocation problem and solution containers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class InfeasibleRoundError(RuntimeError):
    """No assignment serves every user; ``users`` lists the offending user ids."""

    def __init__(self, message, users=()):
        super().__init__(message)
        self.users = list(users)


class EmptyRoundError(RuntimeError):
    """Every scheduled user was dropped."""


@dataclass
class AllocProblem:
    scheduled: list
    cnr: np.ndarray
    comp_cycles: np.ndarray
    budgets_j: np.ndarray
    p_max_w: float
    f_min_hz: float
    f_max_hz: float
    model_bits: float
    bandwidth_hz: float
    kappa: float
    # only used for ordering and tie-breaks; None ranks by mean CNR instead
    pathloss_db: np.ndarray | None = None

    def __post_init__(self):
        self.scheduled = [int(u) for u in self.scheduled]
        self.cnr = np.atleast_2d(np.asarray(self.cnr, dtype=float))
        self.comp_cycles = np.asarray(self.comp_cycles, dtype=float).reshape(-1)
        self.budgets_j = np.asarray(self.budgets_j, dtype=float).reshape(-1)
        v = len(self.scheduled)
        if self.cnr.shape[0] != v or self.comp_cycles.shape[0] != v or self.budgets_j.shape[0] != v:
            raise ValueError("per-user arrays must match the scheduled set")
        if not np.all(self.cnr > 0):
            raise ValueError("cnr must be positive")
        if np.any(self.budgets_j < 0):
            raise ValueError("budgets must be non-negative")
        if self.f_min_hz > self.f_max_hz:
            raise ValueError("f_min_hz must not exceed f_max_hz")
        if self.pathloss_db is None:
            self.pathloss_db = -10.0 * np.log10(self.cnr.mean(axis=1))
        else:
            self.pathloss_db = np.asarray(self.pathloss_db, dtype=float).reshape(-1)

    @property
    def n_users(self) -> int:
        return len(self.scheduled)

    @property
    def n_subcarriers(self) -> int:
        return self.cnr.shape[1]

    def comp_time(self, freq):
        return self.comp_cycles / np.asarray(freq, dtype=float)

    def comp_energy(self, freq):
        return self.kappa * self.comp_cycles * np.asarray(freq, dtype=float) ** 2

    def subset(self, keep) -> "AllocProblem":
        """Problem restricted to the local user indices in ``keep``."""
        keep = np.asarray(keep, dtype=int)
        return AllocProblem(
            scheduled=[self.scheduled[i] for i in keep], cnr=self.cnr[keep],
            comp_cycles=self.comp_cycles[keep], budgets_j=self.budgets_j[keep],
            p_max_w=self.p_max_w, f_min_hz=self.f_min_hz, f_max_hz=self.f_max_hz,
            model_bits=self.model_bits, bandwidth_hz=self.bandwidth_hz, kappa=self.kappa,
            pathloss_db=self.pathloss_db[keep],
        )


@dataclass
class DualMultipliers:
    lambda_n: np.ndarray
    gamma_n: np.ndarray
    mu_n: np.ndarray
    nu_m: np.ndarray
    step_index: int


@dataclass
class RoundAllocation:
    """Solution for one round. Per-user arrays follow ``users``; dropped users are excluded.

    ``assignment`` holds the owning user id per subcarrier, -1 when unassigned.
    """
    users: list
    assignment: np.ndarray
    power_w: np.ndarray
    freq_hz: np.ndarray
    t_cp_s: np.ndarray
    t_cm_s: np.ndarray
    e_cp_j: np.ndarray
    e_cm_j: np.ndarray
    round_time_s: float
    dropped: list = field(default_factory=list)
    history: list = field(default_factory=list)
    duals: DualMultipliers | None = None

    @property
    def total_time_s(self) -> np.ndarray:
        return self.t_cp_s + self.t_cm_s

    @property
    def total_energy_j(self) -> np.ndarray:
        return self.e_cp_j + self.e_cm_j

    def to_json(self) -> str:
        return json.dumps({
            "users": list(self.users),
            "assignment": self.assignment.tolist(),
            "power": self.power_w.tolist(),
            "freq": self.freq_hz.tolist(),
            "times": {"t_cp": self.t_cp_s.tolist(), "t_cm": self.t_cm_s.tolist(),
                      "round": self.round_time_s},
            "energies": {"e_cp": self.e_cp_j.tolist(), "e_cm": self.e_cm_j.tolist()},
            "dropped": list(self.dropped),
        })


def check_constraints(alloc: RoundAllocation, problem: AllocProblem, *,
                      require_full=False, tol=1e-9) -> list[str]:
    """Return human-readable violations of the per-round constraint set (empty if none)."""
    out = []
    idx = {u: i for i, u in enumerate(problem.scheduled)}
    owners = alloc.assignment
    active = set(alloc.users)
    for m, o in enumerate(owners):
        if o >= 0 and o not in active:
            out.append(f"subcarrier {m} owned by inactive user {o}")
    if require_full and np.any(owners < 0):
        out.append("unassigned subcarrier")
    for j, u in enumerate(alloc.users):
        i = idx[u]
        p = alloc.power_w[j]
        if np.any(p < 0):
            out.append(f"user {u}: negative power")
        if np.any(p[owners != u] != 0):
            out.append(f"user {u}: power on a subcarrier it does not own")
        if p.sum() > problem.p_max_w + tol:
            out.append(f"user {u}: total power {p.sum()} > {problem.p_max_w}")
        e = alloc.e_cp_j[j] + alloc.e_cm_j[j]
        if e > problem.budgets_j[i] + tol:
            out.append(f"user {u}: energy {e} > budget {problem.budgets_j[i]}")
        f = alloc.freq_hz[j]
        if not problem.f_min_hz - tol <= f <= problem.f_max_hz + tol:
            out.append(f"user {u}: frequency {f} outside range")
    if alloc.users:
        rt = float(np.max(alloc.total_time_s))
        if rt != alloc.round_time_s:
            out.append(f"round time {alloc.round_time_s} != max user time {rt}")
    return out
