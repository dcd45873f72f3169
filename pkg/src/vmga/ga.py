"""Genetic algorithm for VM-to-PM placement.

Chromosomes are int64 arrays of PM indices. Fitness is a weighted sum of
normalized energy, SLA violation rate, migrations and the makespan proxy, plus
a penalty on residual capacity overflow; lower is better. Offspring are
repaired after mutation, so the penalty only bites when demand cannot be
packed at all.

All random draws come from one ``numpy.random.Generator`` seeded from
``GaConfig.seed`` and are made in a fixed sequential order, so a config fully
determines the result.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from . import kernels
from .datacenter import (
    JOULES_PER_KWH,
    Instance,
    MetricsReport,
    capacity_overflow,
    check_placement,
    energy_kwh,
    estimate_exec_time,
    evaluate,
    migration_count,
    sla_violation_pct,
)


@dataclass(frozen=True)
class FitnessWeights:
    w_energy: float = 0.4
    w_sla: float = 0.3
    w_mig: float = 0.2
    w_time: float = 0.1

    def __post_init__(self):
        ws = (self.w_energy, self.w_sla, self.w_mig, self.w_time)
        if min(ws) < 0 or sum(ws) <= 0:
            raise ValueError("weights must be non-negative with a positive sum")


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    max_generations: int = 300
    stagnation_window: int = 20
    stagnation_epsilon: float = 1e-9
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # None -> 1/N
    tournament_size: int = 3
    elitism_count: int = 2
    infeasibility_lambda: float = 10.0
    weights: FitnessWeights = field(default_factory=FitnessWeights)
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if self.stagnation_window < 1:
            raise ValueError("stagnation_window must be >= 1")
        if not 0 <= self.crossover_rate <= 1:
            raise ValueError("crossover_rate must lie in [0, 1]")
        if self.mutation_rate is not None and not 0 <= self.mutation_rate <= 1:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must lie in [1, population_size]")
        if not 0 <= self.elitism_count < self.population_size:
            raise ValueError("elitism_count must lie in [0, population_size)")
        if self.infeasibility_lambda < 0:
            raise ValueError("infeasibility_lambda must be non-negative")

    @classmethod
    def from_mapping(cls, data: dict) -> "GaConfig":
        """Build from a flat or nested mapping (e.g. a TOML ``[ga]`` table)."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown GA config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "weights" in kwargs and not isinstance(kwargs["weights"], FitnessWeights):
            w = kwargs["weights"]
            kwargs["weights"] = FitnessWeights(*w) if isinstance(w, (list, tuple)) else FitnessWeights(**w)
        return cls(**kwargs)

    def with_seed(self, seed: int) -> "GaConfig":
        return replace(self, seed=int(seed))

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class NormBounds:
    """Scale factors that map energy and makespan into [0, 1] for feasible placements."""

    e_max: float
    t_max: float

    def __post_init__(self):
        if not (self.e_max > 0 and self.t_max > 0):
            raise ValueError("normalization bounds must be positive")

    @classmethod
    def from_instance(cls, instance: Instance) -> "NormBounds":
        e_max = float(instance.p_max.sum()) * instance.horizon / JOULES_PER_KWH
        t_max = float(instance.work.sum()) / float(instance.cpu_capacity.min())
        # All-zero CPU demand gives zero work; any positive scale keeps T/t_max = 0.
        return cls(e_max=e_max if e_max > 0 else 1.0, t_max=t_max if t_max > 0 else 1.0)


@dataclass
class GaResult:
    best: np.ndarray
    best_fitness: float
    fitness_history: list[float]
    generations_run: int
    metrics: MetricsReport
    wall_time_s: float


def _combine(energy, sla_pct, mig, span, overflow, n_vms, weights, bounds, lam):
    return (
        weights.w_energy * (energy / bounds.e_max)
        + weights.w_sla * (sla_pct / 100.0)
        + weights.w_mig * (mig / n_vms)
        + weights.w_time * (span / bounds.t_max)
        + lam * overflow
    )


def fitness(placement, instance: Instance, previous=None, weights: FitnessWeights | None = None,
            bounds: NormBounds | None = None, lam: float = 10.0) -> float:
    """Scalar fitness of one placement, computed from the reference metric functions."""
    weights = weights or FitnessWeights()
    bounds = bounds or NormBounds.from_instance(instance)
    arr = check_placement(placement, instance)
    mig = 0 if previous is None else migration_count(previous, arr)
    return float(_combine(
        energy_kwh(arr, instance), sla_violation_pct(arr, instance), mig,
        estimate_exec_time(arr, instance), capacity_overflow(arr, instance),
        instance.n_vms, weights, bounds, lam,
    ))


def population_fitness(pop: np.ndarray, instance: Instance, previous=None,
                       weights: FitnessWeights | None = None, bounds: NormBounds | None = None,
                       lam: float = 10.0, backend: str | None = None) -> np.ndarray:
    """Fitness of every row of a (P, N) population via the active kernel backend."""
    weights = weights or FitnessWeights()
    bounds = bounds or NormBounds.from_instance(instance)
    pop = np.ascontiguousarray(pop, dtype=np.int64)
    st = kernels.population_stats(pop, instance, backend=backend)
    energy = st[:, kernels.POWER_W] * instance.horizon / JOULES_PER_KWH
    sla_pct = 100.0 * st[:, kernels.N_OVER_SLA] / st[:, kernels.N_ACTIVE]
    if previous is None:
        mig = np.zeros(pop.shape[0])
    else:
        mig = np.count_nonzero(pop != np.asarray(previous, dtype=np.int64)[None, :], axis=1).astype(float)
    return _combine(energy, sla_pct, mig, st[:, kernels.MAKESPAN], st[:, kernels.OVERFLOW],
                    instance.n_vms, weights, bounds, lam)


def repair(placement, instance: Instance) -> np.ndarray:
    """Move VMs off overloaded PMs until feasible or stuck.

    Repeatedly takes the lowest-indexed overloaded PM, removes its largest-CPU
    movable VM and puts it on the fitting PM with the lowest resulting CPU
    utilization. A VM with no fitting destination is left in place. Every
    move lands on a PM that stays feasible, so at most N moves happen.
    """
    arr = np.array(check_placement(placement, instance), dtype=np.int64, copy=True)
    kernels.repair_inplace(arr, instance)
    return arr


def init_population(instance: Instance, config: GaConfig, rng: np.random.Generator) -> np.ndarray:
    pop = rng.integers(0, instance.n_pms, size=(config.population_size, instance.n_vms), dtype=np.int64)
    for row in pop:
        kernels.repair_inplace(row, instance)
    return pop


def _tournament_index(fit: np.ndarray, k: int, rng: np.random.Generator) -> int:
    drawn = rng.integers(0, fit.shape[0], size=k)
    # argmin returns the first minimum, i.e. the earliest draw wins ties.
    return int(drawn[np.argmin(fit[drawn])])


def tournament_select(population: np.ndarray, fit: Sequence[float], k: int,
                      rng: np.random.Generator) -> np.ndarray:
    """Best of ``k`` members drawn uniformly with replacement."""
    fit = np.asarray(fit, dtype=float)
    if len(population) == 0:
        raise ValueError("empty population")
    if not 1 <= k <= len(population):
        raise ValueError("tournament size must lie in [1, population size]")
    return np.array(population[_tournament_index(fit, k, rng)], copy=True)


def two_point_crossover(parent_a, parent_b, rng: np.random.Generator, rate: float = 1.0,
                        cuts: tuple[int, int] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Swap the gene segment [i, j) between two parents.

    With probability ``1 - rate`` the parents are returned as copies. ``cuts``
    pins the cut points, bypassing both random draws.
    """
    a = np.array(parent_a, dtype=np.int64, copy=True)
    b = np.array(parent_b, dtype=np.int64, copy=True)
    if a.shape != b.shape:
        raise ValueError("parents must have equal length")
    n = a.shape[0]
    if cuts is None:
        if rng.random() >= rate:
            return a, b
        i, j = sorted(int(c) for c in rng.choice(n + 1, size=2, replace=False))
    else:
        i, j = cuts
        if not 0 <= i < j <= n:
            raise ValueError("cuts must satisfy 0 <= i < j <= N")
    seg = a[i:j].copy()
    a[i:j] = b[i:j]
    b[i:j] = seg
    return a, b


def mutate(placement, mutation_rate: float, n_pms: int, rng: np.random.Generator) -> np.ndarray:
    """Reassign each gene with probability ``mutation_rate`` to one of the other PMs."""
    out = np.array(placement, dtype=np.int64, copy=True)
    if n_pms < 2 or mutation_rate <= 0:
        return out
    hit = rng.random(out.shape[0]) < mutation_rate
    count = int(hit.sum())
    if count:
        draw = rng.integers(0, n_pms - 1, size=count)
        old = out[hit]
        out[hit] = draw + (draw >= old)
    return out


def evolve(instance: Instance, config: GaConfig | None = None, previous=None,
           backend: str | None = None) -> GaResult:
    """Run the GA to termination and return the best placement found.

    ``previous`` is the incumbent placement; it drives the migration term and
    the reported migration count. Generation 1 is the initial population.
    """
    config = config or GaConfig()
    start = time.perf_counter()
    if previous is not None:
        previous = check_placement(previous, instance)
    bounds = NormBounds.from_instance(instance)
    n, m = instance.n_vms, instance.n_pms
    rate = config.mutation_rate if config.mutation_rate is not None else 1.0 / n
    size = config.population_size

    def score(pop):
        return population_fitness(pop, instance, previous, config.weights, bounds,
                                  config.infeasibility_lambda, backend=backend)

    rng = np.random.default_rng(config.seed)
    pop = init_population(instance, config, rng)
    fit = score(pop)
    b = int(np.argmin(fit))
    best, best_fit = pop[b].copy(), float(fit[b])
    history = [best_fit]
    generations = 1
    window = config.stagnation_window

    while generations < config.max_generations and m > 1:
        if len(history) > window and history[-window - 1] - history[-1] < config.stagnation_epsilon:
            break
        order = np.argsort(fit, kind="stable")
        nxt = np.empty_like(pop)
        nxt[: config.elitism_count] = pop[order[: config.elitism_count]]
        filled = config.elitism_count
        while filled < size:
            pa = pop[_tournament_index(fit, config.tournament_size, rng)]
            pb = pop[_tournament_index(fit, config.tournament_size, rng)]
            for child in two_point_crossover(pa, pb, rng, rate=config.crossover_rate):
                if filled == size:
                    break
                child = mutate(child, rate, m, rng)
                kernels.repair_inplace(child, instance, backend=backend)
                nxt[filled] = child
                filled += 1
        pop = nxt
        fit = score(pop)
        generations += 1
        b = int(np.argmin(fit))
        if fit[b] < best_fit:
            best, best_fit = pop[b].copy(), float(fit[b])
        history.append(best_fit)

    wall = time.perf_counter() - start
    return GaResult(
        best=best,
        best_fitness=best_fit,
        fitness_history=history,
        generations_run=generations,
        metrics=evaluate(best, instance, previous),
        wall_time_s=wall,
    )
