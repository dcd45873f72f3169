"""Pure numpy implementations of the population kernels.

Same arguments, return values and loop order as the compiled ``_ckernels``
module, so the two agree to the last few ulps.
"""
import numpy as np


def population_stats(pop, cpu, mem, work, cpu_cap, mem_cap, p_idle, p_max,
                     sla_threshold, feas_tol):
    pop = np.asarray(pop, dtype=np.int64)
    P, _ = pop.shape
    M = cpu_cap.shape[0]
    # Offset every row into its own block of M bins; bincount then sums each
    # PM's VMs sequentially in VM order, exactly like the compiled loop.
    flat = (pop + (np.arange(P, dtype=np.int64) * M)[:, None]).ravel()
    size = P * M
    lc = np.bincount(flat, weights=np.tile(cpu, P), minlength=size).reshape(P, M)
    lm = np.bincount(flat, weights=np.tile(mem, P), minlength=size).reshape(P, M)
    lw = np.bincount(flat, weights=np.tile(work, P), minlength=size).reshape(P, M)
    active = np.bincount(flat, minlength=size).reshape(P, M) > 0

    u = lc / cpu_cap
    mu = lm / mem_cap
    watts = np.where(active, p_idle + (p_max - p_idle) * np.minimum(u, 1.0), 0.0)
    over_c = np.where(active & (u - 1.0 > feas_tol), u - 1.0, 0.0)
    over_m = np.where(active & (mu - 1.0 > feas_tol), mu - 1.0, 0.0)
    span = np.where(active, lw / cpu_cap, 0.0)

    out = np.empty((P, 5), dtype=np.float64)
    out[:, 1] = active.sum(axis=1)
    out[:, 2] = (active & (u > sla_threshold)).sum(axis=1)
    out[:, 4] = span.max(axis=1)
    # Per-row sequential accumulation over PMs, mirroring the compiled loop.
    for r in range(P):
        power = 0.0
        overflow = 0.0
        for j in np.flatnonzero(active[r]):
            power += watts[r, j]
            overflow += over_c[r, j]
            overflow += over_m[r, j]
        out[r, 0] = power
        out[r, 3] = overflow
    return out


def repair_inplace(assign, cpu, mem, cpu_cap, mem_cap, feas_tol):
    M = cpu_cap.shape[0]
    lc = np.zeros(M)
    lm = np.zeros(M)
    for i, pm in enumerate(assign):
        lc[pm] += cpu[i]
        lm[pm] += mem[i]
    cap_c = cpu_cap * (1.0 + feas_tol)
    cap_m = mem_cap * (1.0 + feas_tol)
    frozen = np.zeros(assign.shape[0], dtype=bool)
    moves = 0
    while True:
        src = v = -1
        for j in np.flatnonzero((lc > cap_c) | (lm > cap_m)):
            hosted = np.flatnonzero((assign == j) & ~frozen)
            if hosted.size:
                src = int(j)
                v = int(hosted[np.argmax(cpu[hosted])])  # argmax keeps the lowest index on ties
                break
        if src == -1:
            break
        nu = lc + cpu[v]
        nm = lm + mem[v]
        ok = (nu <= cap_c) & (nm <= cap_m)
        ok[src] = False
        if not ok.any():
            frozen[v] = True
            continue
        cand = np.flatnonzero(ok)
        best = -1
        best_u = 0.0
        for t in cand:
            cu = nu[t] / cpu_cap[t]
            if best == -1 or cu < best_u:
                best, best_u = int(t), cu
        lc[src] -= cpu[v]
        lm[src] -= mem[v]
        lc[best] += cpu[v]
        lm[best] += mem[v]
        assign[v] = best
        moves += 1
    return moves
