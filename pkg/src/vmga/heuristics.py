"""First-Fit Decreasing and Best-Fit Decreasing baselines (CPU and memory both checked)."""
from __future__ import annotations

import numpy as np

from .datacenter import Instance
from .errors import InfeasibleError
from .kernels import FEAS_TOL


def _decreasing_order(instance: Instance) -> list[int]:
    # CPU descending, then memory descending, then VM id ascending.
    return sorted(
        range(instance.n_vms),
        key=lambda i: (-instance.vms[i].cpu_demand, -instance.vms[i].mem_demand, instance.vms[i].id),
    )


def _greedy(instance: Instance, best_fit: bool) -> np.ndarray:
    cap_c = instance.cpu_capacity
    cap_m = instance.mem_capacity
    free_c = cap_c.copy()
    free_m = cap_m.copy()
    slack_c = cap_c * FEAS_TOL
    slack_m = cap_m * FEAS_TOL
    out = np.empty(instance.n_vms, dtype=np.int64)
    for i in _decreasing_order(instance):
        vm = instance.vms[i]
        fits = (vm.cpu_demand <= free_c + slack_c) & (vm.mem_demand <= free_m + slack_m)
        candidates = np.flatnonzero(fits)
        if candidates.size == 0:
            raise InfeasibleError(vm.id)
        if best_fit:
            rem_c = free_c[candidates] - vm.cpu_demand
            rem_m = free_m[candidates] - vm.mem_demand
            # lexsort: last key is primary; candidates are already index-ascending.
            j = int(candidates[np.lexsort((candidates, rem_m, rem_c))[0]])
        else:
            j = int(candidates[0])
        free_c[j] -= vm.cpu_demand
        free_m[j] -= vm.mem_demand
        out[i] = j
    return out


def ffd_place(instance: Instance) -> np.ndarray:
    """Place each VM, largest first, on the lowest-indexed PM that still fits it."""
    return _greedy(instance, best_fit=False)


def bfd_place(instance: Instance) -> np.ndarray:
    """Place each VM, largest first, on the fitting PM left with the least free CPU."""
    return _greedy(instance, best_fit=True)


def check_hostable(instance: Instance) -> None:
    """Raise :class:`InfeasibleError` for the first VM that fits on no PM even when alone."""
    cap_c = instance.cpu_capacity * (1 + FEAS_TOL)
    cap_m = instance.mem_capacity * (1 + FEAS_TOL)
    for vm in instance.vms:
        if not np.any((vm.cpu_demand <= cap_c) & (vm.mem_demand <= cap_m)):
            raise InfeasibleError(vm.id)
