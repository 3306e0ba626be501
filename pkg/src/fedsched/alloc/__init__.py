"""Per-round CPU, subcarrier and power allocation."""
from .ado import ado_optimize, cpu_freq_opt, feasibility_screen
from .solvers import dual_step_size, finalise, kkt_power, lcra_assign, lcra_solve, ldra_solve
from .types import (AllocProblem, DualMultipliers, EmptyRoundError, InfeasibleRoundError,
                    RoundAllocation, check_constraints)
from .waterfill import (energy_limited_level, lambert_w, level_for_rate, power_limited_level,
                        powers_at, rate_of, usable_level)

__all__ = [
    "AllocProblem", "DualMultipliers", "dual_step_size", "kkt_power", "EmptyRoundError", "InfeasibleRoundError",
    "RoundAllocation", "ado_optimize", "check_constraints", "cpu_freq_opt",
    "energy_limited_level", "feasibility_screen", "finalise", "lambert_w", "lcra_assign",
    "lcra_solve", "ldra_solve", "level_for_rate", "power_limited_level", "powers_at",
    "rate_of", "usable_level",
]
