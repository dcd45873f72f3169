"""VMs, PMs, placements, the linear power model and the evaluation metrics.

A placement is a 1-D integer numpy array of length N whose i-th entry is the
PM index hosting VM i. Everything here is the scalar reference path; the GA
evaluates whole populations through :mod:`vmga.kernels` instead.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .kernels import FEAS_TOL

DEFAULT_P_IDLE = 70.0
DEFAULT_P_MAX = 250.0
DEFAULT_HORIZON = 3600.0
DEFAULT_SLA_THRESHOLD = 0.8
JOULES_PER_KWH = 3.6e6

Placement = np.ndarray


@dataclass(frozen=True)
class VmSpec:
    id: int
    cpu_demand: float
    mem_demand: float
    duration: float

    def __post_init__(self):
        if self.cpu_demand < 0 or self.mem_demand < 0:
            raise ValueError(f"VM {self.id}: demands must be non-negative")
        if not self.duration > 0:
            raise ValueError(f"VM {self.id}: duration must be positive")


@dataclass(frozen=True)
class PmSpec:
    id: int
    cpu_capacity: float
    mem_capacity: float
    p_idle: float = DEFAULT_P_IDLE
    p_max: float = DEFAULT_P_MAX

    def __post_init__(self):
        if not (self.cpu_capacity > 0 and self.mem_capacity > 0):
            raise ValueError(f"PM {self.id}: capacities must be positive")
        if not 0 <= self.p_idle <= self.p_max:
            raise ValueError(f"PM {self.id}: need 0 <= p_idle <= p_max")


@dataclass(frozen=True)
class Instance:
    vms: tuple[VmSpec, ...]
    pms: tuple[PmSpec, ...]
    horizon: float = DEFAULT_HORIZON
    sla_threshold: float = DEFAULT_SLA_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "vms", tuple(self.vms))
        object.__setattr__(self, "pms", tuple(self.pms))
        if not self.vms or not self.pms:
            raise ValueError("an instance needs at least one VM and one PM")
        if len({v.id for v in self.vms}) != len(self.vms):
            raise ValueError("VM ids must be unique")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not 0 < self.sla_threshold <= 1:
            raise ValueError("sla_threshold must lie in (0, 1]")

    @property
    def n_vms(self) -> int:
        return len(self.vms)

    @property
    def n_pms(self) -> int:
        return len(self.pms)

    # Column views consumed by the kernels. Safe on a frozen dataclass because
    # cached_property writes straight into __dict__.
    @cached_property
    def cpu_demand(self) -> np.ndarray:
        return np.array([v.cpu_demand for v in self.vms], dtype=np.float64)

    @cached_property
    def mem_demand(self) -> np.ndarray:
        return np.array([v.mem_demand for v in self.vms], dtype=np.float64)

    @cached_property
    def work(self) -> np.ndarray:
        return np.array([v.duration * v.cpu_demand for v in self.vms], dtype=np.float64)

    @cached_property
    def cpu_capacity(self) -> np.ndarray:
        return np.array([p.cpu_capacity for p in self.pms], dtype=np.float64)

    @cached_property
    def mem_capacity(self) -> np.ndarray:
        return np.array([p.mem_capacity for p in self.pms], dtype=np.float64)

    @cached_property
    def p_idle(self) -> np.ndarray:
        return np.array([p.p_idle for p in self.pms], dtype=np.float64)

    @cached_property
    def p_max(self) -> np.ndarray:
        return np.array([p.p_max for p in self.pms], dtype=np.float64)

    def with_demands(self, cpu: Sequence[float], mem: Sequence[float] | None = None) -> "Instance":
        """Copy of this instance with VM demands replaced (same N and M)."""
        cpu = np.asarray(cpu, dtype=float)
        if cpu.shape != (self.n_vms,):
            raise ValueError(f"expected {self.n_vms} CPU demands, got shape {cpu.shape}")
        mem_arr = self.mem_demand if mem is None else np.asarray(mem, dtype=float)
        if mem_arr.shape != (self.n_vms,):
            raise ValueError(f"expected {self.n_vms} memory demands")
        vms = tuple(
            VmSpec(v.id, float(c), float(m), v.duration)
            for v, c, m in zip(self.vms, cpu, mem_arr)
        )
        return Instance(vms, self.pms, self.horizon, self.sla_threshold)

    def to_dict(self) -> dict:
        return {
            "vms": [asdict(v) for v in self.vms],
            "pms": [asdict(p) for p in self.pms],
            "horizon": self.horizon,
            "sla_threshold": self.sla_threshold,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        try:
            return cls(
                vms=tuple(VmSpec(**v) for v in data["vms"]),
                pms=tuple(PmSpec(**p) for p in data["pms"]),
                horizon=float(data.get("horizon", DEFAULT_HORIZON)),
                sla_threshold=float(data.get("sla_threshold", DEFAULT_SLA_THRESHOLD)),
            )
        except KeyError as exc:
            raise ValueError(f"instance is missing key {exc}") from None
        except TypeError as exc:
            raise ValueError(f"malformed instance record: {exc}") from None


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(json.dumps(instance.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_instance(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return Instance.from_dict(json.load(fh))


BUNDLED_INSTANCE = "instance_50x20_seed7.json"


def bundled_instance() -> Instance:
    """The shipped 50-VM / 20-PM synthetic instance (``vmga generate --seed 7``)."""
    text = resources.files(__package__).joinpath("data", BUNDLED_INSTANCE).read_text(encoding="utf-8")
    return Instance.from_dict(json.loads(text))


CSV_HEADER = ("strategy", "energy_kwh", "sla_pct", "migrations", "exec_time_s", "active_pms")


@dataclass(frozen=True)
class MetricsReport:
    """The five evaluation metrics. Averaged reports carry float counts."""

    energy_kwh: float
    sla_violation_pct: float
    migrations: int
    exec_time_s: float
    active_pms: int

    def csv_row(self, strategy: str) -> list[str]:
        return [
            strategy,
            repr(float(self.energy_kwh)),
            repr(float(self.sla_violation_pct)),
            repr(self.migrations),
            repr(float(self.exec_time_s)),
            repr(self.active_pms),
        ]

    def as_dict(self) -> dict:
        return asdict(self)


def check_placement(placement, instance: Instance) -> np.ndarray:
    """Coerce to an int64 array and verify shape and index range."""
    arr = np.asarray(placement, dtype=np.int64)
    if arr.shape != (instance.n_vms,):
        raise ValueError(f"placement must have length {instance.n_vms}, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() >= instance.n_pms):
        raise ValueError(f"placement values must lie in [0, {instance.n_pms})")
    return arr


def _loads(placement: np.ndarray, instance: Instance) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = instance.n_pms
    cpu = np.bincount(placement, weights=instance.cpu_demand, minlength=m)
    mem = np.bincount(placement, weights=instance.mem_demand, minlength=m)
    hosted = np.bincount(placement, minlength=m)
    return cpu, mem, hosted


def pm_utilization(placement, instance: Instance, pm_index: int) -> tuple[float, float]:
    """CPU and memory utilization of one PM, not truncated at 1."""
    if not 0 <= pm_index < instance.n_pms:
        raise IndexError(f"pm_index {pm_index} out of range [0, {instance.n_pms})")
    arr = check_placement(placement, instance)
    mask = arr == pm_index
    pm = instance.pms[pm_index]
    cpu = float(instance.cpu_demand[mask].sum())
    mem = float(instance.mem_demand[mask].sum())
    return cpu / pm.cpu_capacity, mem / pm.mem_capacity


def power_watts(pm: PmSpec, cpu_util: float, hosts_any_vm: bool) -> float:
    """Linear idle-to-peak power; empty PMs are powered off."""
    if cpu_util < 0:
        raise ValueError("cpu_util must be non-negative")
    if not hosts_any_vm:
        return 0.0
    return pm.p_idle + (pm.p_max - pm.p_idle) * min(cpu_util, 1.0)


def energy_kwh(placement, instance: Instance) -> float:
    arr = check_placement(placement, instance)
    cpu, _, hosted = _loads(arr, instance)
    watts = 0.0
    for j, pm in enumerate(instance.pms):
        watts += power_watts(pm, cpu[j] / pm.cpu_capacity, bool(hosted[j]))
    return float(watts * instance.horizon / JOULES_PER_KWH)


def sla_violation_pct(placement, instance: Instance) -> float:
    """Percentage of active PMs whose CPU utilization exceeds the SLA threshold."""
    arr = check_placement(placement, instance)
    cpu, _, hosted = _loads(arr, instance)
    active = hosted > 0
    n_active = int(active.sum())
    if n_active == 0:
        return 0.0
    over = (cpu / instance.cpu_capacity > instance.sla_threshold) & active
    return 100.0 * int(over.sum()) / n_active


def migration_count(previous, nxt) -> int:
    """Hamming distance between two placements."""
    a = np.asarray(previous)
    b = np.asarray(nxt)
    if a.shape != b.shape:
        raise ValueError(f"placement length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def active_pm_count(placement, instance: Instance) -> int:
    arr = check_placement(placement, instance)
    return int(np.unique(arr).size)


def capacity_overflow(placement, instance: Instance) -> float:
    """Summed relative overload over PMs and both resources; 0 iff feasible."""
    arr = check_placement(placement, instance)
    cpu, mem, _ = _loads(arr, instance)
    ex_cpu = cpu / instance.cpu_capacity - 1.0
    ex_mem = mem / instance.mem_capacity - 1.0
    # Overshoot below FEAS_TOL is summation noise, not overload.
    total = 0.0
    for j in range(instance.n_pms):
        if ex_cpu[j] > FEAS_TOL:
            total += ex_cpu[j]
        if ex_mem[j] > FEAS_TOL:
            total += ex_mem[j]
    return float(total)


def estimate_exec_time(placement, instance: Instance) -> float:
    """Makespan proxy: max over active PMs of hosted work divided by CPU capacity."""
    arr = check_placement(placement, instance)
    work = np.bincount(arr, weights=instance.work, minlength=instance.n_pms)
    hosted = np.bincount(arr, minlength=instance.n_pms) > 0
    return float((work[hosted] / instance.cpu_capacity[hosted]).max())


def evaluate(placement, instance: Instance, previous=None) -> MetricsReport:
    arr = check_placement(placement, instance)
    if previous is None:
        migrations = 0
    else:
        migrations = migration_count(check_placement(previous, instance), arr)
    return MetricsReport(
        energy_kwh=float(energy_kwh(arr, instance)),
        sla_violation_pct=float(sla_violation_pct(arr, instance)),
        migrations=migrations,
        exec_time_s=float(estimate_exec_time(arr, instance)),
        active_pms=active_pm_count(arr, instance),
    )


@dataclass(frozen=True)
class PmType:
    """Hardware profile used by :func:`synth_fleet`."""

    cpu_capacity: float
    mem_capacity: float
    p_idle: float
    p_max: float
    weight: float = field(default=1.0)


# Older small hosts use the default wattages; newer large hosts are more
# energy-proportional per core.
DEFAULT_PM_TYPES = (
    PmType(16.0, 64.0, DEFAULT_P_IDLE, DEFAULT_P_MAX, 0.5),
    PmType(32.0, 128.0, 95.0, 330.0, 0.3),
    PmType(64.0, 256.0, 120.0, 420.0, 0.2),
)


def synth_fleet(pm_count: int, seed: int, types: Sequence[PmType] = DEFAULT_PM_TYPES) -> tuple[PmSpec, ...]:
    """Draw a heterogeneous PM fleet, types sampled by weight in random order."""
    if pm_count < 1:
        raise ValueError("pm_count must be >= 1")
    rng = np.random.default_rng(seed)
    weights = np.array([t.weight for t in types], dtype=float)
    picks = rng.choice(len(types), size=pm_count, p=weights / weights.sum())
    return tuple(
        PmSpec(j, types[k].cpu_capacity, types[k].mem_capacity, types[k].p_idle, types[k].p_max)
        for j, k in enumerate(picks)
    )
