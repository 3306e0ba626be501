"""Kernel backend selection: compiled extension if importable, else the pure-Python reference.

Set ``FEDSCHED_PURE_PYTHON=1`` to force the reference implementation.
"""
import os

from . import _kernels_py

if os.environ.get("FEDSCHED_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

lambertw = _impl.lambertw
power_level = _impl.power_level
energy_level = _impl.energy_level
max_level = _impl.max_level
rate_level = _impl.rate_level
level_stats = _impl.level_stats
lcra_phase1 = _impl.lcra_phase1
ldra_dual = _impl.ldra_dual
local_search = _impl.local_search
