"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--vms 200] [--pms 60] [--pop 100] [--repeat 20]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from vmga import kernels
from vmga.datacenter import synth_fleet
from vmga.ga import GaConfig, evolve
from vmga.trace import SynthSpec, instance_from_records, synth_workload


def build(vms: int, pms: int, seed: int = 0):
    records = synth_workload(SynthSpec(vm_count=vms), seed)
    return instance_from_records(records, synth_fleet(pms, seed))


def bench(label, fn, repeat):
    best = min(timeit.repeat(fn, number=1, repeat=repeat))
    print(f"  {label:<28s} {best * 1e3:9.3f} ms")
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--vms", type=int, default=200)
    ap.add_argument("--pms", type=int, default=60)
    ap.add_argument("--pop", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    inst = build(args.vms, args.pms)
    rng = np.random.default_rng(1)
    pop = rng.integers(0, inst.n_pms, size=(args.pop, inst.n_vms), dtype=np.int64)
    backends = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    print(f"instance: {inst.n_vms} VMs, {inst.n_pms} PMs; population {args.pop}; default backend {kernels.BACKEND}")
    results = {}
    for name in backends:
        print(f"[{name}]")

        def repair_all():
            work = pop.copy()
            for row in work:
                kernels.repair_inplace(row, inst, backend=name)

        stats = bench("population_stats", lambda: kernels.population_stats(pop, inst, backend=name), args.repeat)
        rep = bench("repair (whole population)", repair_all, max(3, args.repeat // 4))
        cfg = GaConfig(seed=0, max_generations=30)
        ga = bench("evolve (30 generations)", lambda: evolve(inst, cfg, backend=name), 3)
        results[name] = (stats, rep, ga)
    if len(results) == 2:
        print("speed-up (python / cython):")
        for k, label in enumerate(("population_stats", "repair", "evolve")):
            print(f"  {label:<28s} {results['python'][k] / results['cython'][k]:9.1f}x")


if __name__ == "__main__":
    main()
