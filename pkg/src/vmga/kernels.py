"""Backend selection for the population kernels.

The compiled ``_ckernels`` extension is used when it is importable; setting
``VMGA_PURE_PYTHON=1`` forces the numpy fallback. Both backends expose
``population_stats`` and ``repair_inplace`` with identical semantics.
"""
import os

from . import _pykernels

# Relative slack on capacity checks so incremental and fresh load sums agree.
FEAS_TOL = 1e-9

# Column layout of population_stats output.
POWER_W, N_ACTIVE, N_OVER_SLA, OVERFLOW, MAKESPAN = range(5)

_compiled = None
if os.environ.get("VMGA_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _pykernels


def get_backend(name=None):
    """Return a kernel module by name ('cython' or 'python'); None means the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available in this install")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def population_stats(pop, instance, backend=None):
    """Per-individual (power W, active PMs, PMs over SLA, overflow, makespan) as a (P, 5) array."""
    return get_backend(backend).population_stats(
        pop, instance.cpu_demand, instance.mem_demand, instance.work,
        instance.cpu_capacity, instance.mem_capacity, instance.p_idle, instance.p_max,
        float(instance.sla_threshold), FEAS_TOL,
    )


def repair_inplace(assign, instance, backend=None):
    """Repair one int64 placement array in place; returns the number of moves made."""
    return get_backend(backend).repair_inplace(
        assign, instance.cpu_demand, instance.mem_demand,
        instance.cpu_capacity, instance.mem_capacity, FEAS_TOL,
    )
