"""Multi-run strategy comparison and the adaptive re-optimization loop."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import ga, heuristics, kernels
from .analysis import ComparisonRow, ComparisonTable
from .datacenter import Instance, MetricsReport, evaluate, migration_count

STRATEGIES = ("FFD", "BFD", "GA", "RANDOM")
DETERMINISTIC = frozenset({"FFD", "BFD"})


def random_place(instance: Instance, seed: int) -> np.ndarray:
    """Uniformly random placement passed through GA repair."""
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, instance.n_pms, size=instance.n_vms, dtype=np.int64)
    kernels.repair_inplace(arr, instance)
    return arr


@dataclass(frozen=True)
class ProtocolConfig:
    runs: int = 10
    seeds: tuple[int, ...] | None = None  # None -> 0..runs-1
    strategies: tuple[str, ...] = ("FFD", "BFD", "GA")
    # "none": every strategy starts from scratch; "random": each run's RANDOM
    # placement is the incumbent that migrations are counted against.
    incumbent: str = "none"

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        seeds = tuple(range(self.runs)) if self.seeds is None else tuple(int(s) for s in self.seeds)
        if len(seeds) != self.runs:
            raise ValueError(f"need exactly {self.runs} seeds, got {len(seeds)}")
        if len(set(seeds)) != len(seeds):
            raise ValueError("seeds must be distinct")
        object.__setattr__(self, "seeds", seeds)
        strategies = tuple(s.upper() for s in self.strategies)
        bad = [s for s in strategies if s not in STRATEGIES]
        if bad or not strategies:
            raise ValueError(f"unknown strategies {bad}; choose from {STRATEGIES}")
        object.__setattr__(self, "strategies", strategies)
        if self.incumbent not in ("none", "random"):
            raise ValueError("incumbent must be 'none' or 'random'")


def average_reports(reports: Sequence[MetricsReport]) -> MetricsReport:
    """Arithmetic mean of every metric."""
    if not reports:
        raise ValueError("nothing to average")
    n = len(reports)

    def mean(attr):
        return math.fsum(getattr(r, attr) for r in reports) / n

    return MetricsReport(
        energy_kwh=mean("energy_kwh"),
        sla_violation_pct=mean("sla_violation_pct"),
        migrations=mean("migrations"),
        exec_time_s=mean("exec_time_s"),
        active_pms=mean("active_pms"),
    )


@dataclass
class RunRecord:
    run_id: int
    strategy: str
    seed: int
    metrics: MetricsReport
    placement: np.ndarray
    wall_time_s: float

    def to_json(self) -> str:
        return json.dumps({
            "run_id": self.run_id,
            "strategy": self.strategy,
            "seed": self.seed,
            "metrics": self.metrics.as_dict(),
            "wall_time_s": self.wall_time_s,
        }, sort_keys=True)


def run_strategy(strategy: str, instance: Instance, seed: int, ga_config: ga.GaConfig | None = None,
                 previous=None) -> tuple[np.ndarray, MetricsReport, float]:
    """One optimizer invocation; returns (placement, metrics, wall seconds)."""
    strategy = strategy.upper()
    start = time.perf_counter()
    if strategy == "FFD":
        placement = heuristics.ffd_place(instance)
    elif strategy == "BFD":
        placement = heuristics.bfd_place(instance)
    elif strategy == "RANDOM":
        placement = random_place(instance, seed)
    elif strategy == "GA":
        cfg = (ga_config or ga.GaConfig()).with_seed(seed)
        placement = ga.evolve(instance, cfg, previous=previous).best
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    wall = time.perf_counter() - start
    return placement, evaluate(placement, instance, previous), wall


def run_protocol(instance: Instance, protocol: ProtocolConfig | None = None,
                 ga_config: ga.GaConfig | None = None,
                 on_run: Callable[[RunRecord], None] | None = None) -> ComparisonTable:
    """Run every strategy once per seed and average the metrics per strategy.

    Rows follow ``protocol.strategies`` order and each row averages the runs
    in seed order, so the table is deterministic. Deterministic strategies
    are still invoked per run (their wall time is measured each time).
    """
    protocol = protocol or ProtocolConfig()
    rows = []
    run_id = 0
    for strategy in protocol.strategies:
        reports, walls = [], []
        for seed in protocol.seeds:
            previous = random_place(instance, seed) if protocol.incumbent == "random" else None
            placement, metrics, wall = run_strategy(strategy, instance, seed, ga_config, previous)
            reports.append(metrics)
            walls.append(wall)
            if on_run is not None:
                on_run(RunRecord(run_id, strategy, seed, metrics, placement, wall))
            run_id += 1
        rows.append(ComparisonRow(strategy, average_reports(reports), len(reports),
                                  wall_time_s=math.fsum(walls) / len(walls)))
    return ComparisonTable(tuple(rows))


def _cpu(demands) -> np.ndarray:
    arr = np.asarray(demands, dtype=float)
    return arr[:, 0] if arr.ndim == 2 else arr


def detect_workload_change(prev_demands, curr_demands, threshold: float = 0.10) -> bool:
    """True iff mean CPU demand moved by strictly more than ``threshold`` (relative)."""
    prev = _cpu(prev_demands)
    curr = _cpu(curr_demands)
    if prev.shape != curr.shape:
        raise ValueError("demand vectors must have equal length")
    base = float(prev.mean())
    if base <= 0:
        raise ValueError("previous mean demand must be positive")
    return abs(float(curr.mean()) - base) / base > threshold


@dataclass
class Epoch:
    index: int
    instance: Instance
    placement: np.ndarray
    metrics: MetricsReport
    optimized: bool = False
    wall_time_s: float = field(default=0.0, compare=False)


def dynamic_loop(epoch_demands: Sequence, instance_template: Instance, ga_config: ga.GaConfig | None = None,
                 threshold: float = 0.10) -> list[Epoch]:
    """Adaptive loop: optimize at epoch 0, then re-optimize only on significant drift.

    Each entry of ``epoch_demands`` is a length-N CPU demand vector, or an
    (N, 2) array of CPU and memory demands. Drift is measured against the
    demands the current placement was optimized for. Re-optimization starts a
    fresh GA population (seed ``ga_config.seed + epoch``) with the running
    placement as migration baseline.
    """
    if len(epoch_demands) == 0:
        raise ValueError("need at least one epoch of demands")
    cfg = ga_config or ga.GaConfig()
    epochs: list[Epoch] = []
    reference = None
    placement = None
    for e, demands in enumerate(epoch_demands):
        arr = np.asarray(demands, dtype=float)
        if arr.ndim == 2:
            inst = instance_template.with_demands(arr[:, 0], arr[:, 1])
        else:
            inst = instance_template.with_demands(arr)
        if placement is None or detect_workload_change(reference, arr, threshold):
            result = ga.evolve(inst, cfg.with_seed(cfg.seed + e), previous=placement)
            previous = placement
            placement = result.best
            reference = arr
            metrics = evaluate(placement, inst, previous)
            epochs.append(Epoch(e, inst, placement, metrics, True, result.wall_time_s))
        else:
            epochs.append(Epoch(e, inst, placement, evaluate(placement, inst, placement), False))
    return epochs


def summarize_epochs(epochs: Sequence[Epoch]) -> dict:
    return {
        "epochs": len(epochs),
        "optimizations": sum(ep.optimized for ep in epochs),
        "total_energy_kwh": math.fsum(ep.metrics.energy_kwh for ep in epochs),
        "cumulative_migrations": sum(
            migration_count(a.placement, b.placement) for a, b in zip(epochs, epochs[1:])
        ),
    }
