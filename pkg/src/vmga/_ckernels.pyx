# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled population kernels. Must stay numerically in step with _pykernels.py."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport calloc, free

cnp.import_array()

cdef int N_STATS = 5


def population_stats(const cnp.int64_t[:, ::1] pop,
                     const double[::1] cpu, const double[::1] mem, const double[::1] work,
                     const double[::1] cpu_cap, const double[::1] mem_cap,
                     const double[::1] p_idle, const double[::1] p_max,
                     double sla_threshold, double feas_tol):
    cdef Py_ssize_t P = pop.shape[0], N = pop.shape[1], M = cpu_cap.shape[0]
    cdef Py_ssize_t r, i, j
    cdef cnp.int64_t pm
    cdef double u, mu, power, overflow, makespan, t
    cdef long n_active, n_over
    out = np.zeros((P, N_STATS), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef double *lc = <double *> calloc(M, sizeof(double))
    cdef double *lm = <double *> calloc(M, sizeof(double))
    cdef double *lw = <double *> calloc(M, sizeof(double))
    cdef long *cnt = <long *> calloc(M, sizeof(long))
    if lc == NULL or lm == NULL or lw == NULL or cnt == NULL:
        free(lc); free(lm); free(lw); free(cnt)
        raise MemoryError()
    try:
        with nogil:
            for r in range(P):
                for j in range(M):
                    lc[j] = 0.0
                    lm[j] = 0.0
                    lw[j] = 0.0
                    cnt[j] = 0
                for i in range(N):
                    pm = pop[r, i]
                    lc[pm] += cpu[i]
                    lm[pm] += mem[i]
                    lw[pm] += work[i]
                    cnt[pm] += 1
                power = 0.0
                overflow = 0.0
                makespan = 0.0
                n_active = 0
                n_over = 0
                for j in range(M):
                    if cnt[j] == 0:
                        continue
                    n_active += 1
                    u = lc[j] / cpu_cap[j]
                    mu = lm[j] / mem_cap[j]
                    if u > sla_threshold:
                        n_over += 1
                    if u - 1.0 > feas_tol:
                        overflow += u - 1.0
                    if mu - 1.0 > feas_tol:
                        overflow += mu - 1.0
                    power += p_idle[j] + (p_max[j] - p_idle[j]) * (u if u < 1.0 else 1.0)
                    t = lw[j] / cpu_cap[j]
                    if t > makespan:
                        makespan = t
                res[r, 0] = power
                res[r, 1] = n_active
                res[r, 2] = n_over
                res[r, 3] = overflow
                res[r, 4] = makespan
    finally:
        free(lc); free(lm); free(lw); free(cnt)
    return out


def repair_inplace(cnp.int64_t[::1] assign,
                   const double[::1] cpu, const double[::1] mem,
                   const double[::1] cpu_cap, const double[::1] mem_cap,
                   double feas_tol):
    cdef Py_ssize_t N = assign.shape[0], M = cpu_cap.shape[0]
    cdef Py_ssize_t i, j, t, v, src, best
    cdef double best_u, nu, nm
    cdef long moves = 0
    cdef double *lc = <double *> calloc(M, sizeof(double))
    cdef double *lm = <double *> calloc(M, sizeof(double))
    cdef char *frozen = <char *> calloc(N, sizeof(char))
    if lc == NULL or lm == NULL or frozen == NULL:
        free(lc); free(lm); free(frozen)
        raise MemoryError()
    try:
        with nogil:
            for i in range(N):
                lc[assign[i]] += cpu[i]
                lm[assign[i]] += mem[i]
            while True:
                src = -1
                v = -1
                for j in range(M):
                    if lc[j] <= cpu_cap[j] * (1.0 + feas_tol) and lm[j] <= mem_cap[j] * (1.0 + feas_tol):
                        continue
                    for i in range(N):
                        if assign[i] == j and not frozen[i]:
                            if v == -1 or cpu[i] > cpu[v]:
                                v = i
                    if v != -1:
                        src = j
                        break
                if src == -1:
                    break
                best = -1
                best_u = 0.0
                for t in range(M):
                    if t == src:
                        continue
                    nu = lc[t] + cpu[v]
                    nm = lm[t] + mem[v]
                    if nu <= cpu_cap[t] * (1.0 + feas_tol) and nm <= mem_cap[t] * (1.0 + feas_tol):
                        if best == -1 or nu / cpu_cap[t] < best_u:
                            best = t
                            best_u = nu / cpu_cap[t]
                if best == -1:
                    frozen[v] = 1
                    continue
                lc[src] -= cpu[v]
                lm[src] -= mem[v]
                lc[best] += cpu[v]
                lm[best] += mem[v]
                assign[v] = best
                moves += 1
    finally:
        free(lc); free(lm); free(frozen)
    return moves
