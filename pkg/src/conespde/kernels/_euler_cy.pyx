# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled stepping kernel: per-path exponential-Euler loops.

Semantics match ``_euler_np`` exactly; see that module's docstring for
the update rule and the bitwise-parity conventions (shared precomputed
constants, identical accumulate order, sup-norm divergence guard,
``+ 0.0`` margin normalization).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef cnp.float64_t f64


cdef void _eval_map(
    Py_ssize_t m,
    const f64* r,
    f64* out,
    const i64* offsets,
    const i64* codes,
    const i64* cutoffs,
    const i64* i0s,
    const f64* f0s,
    const f64* f1s,
    const f64* vecs,      # (T, N) row-major
    const i64* dense_idx,
    const f64* dense,     # (D, N, N) row-major
    Py_ssize_t N,
) noexcept nogil:
    cdef Py_ssize_t t, k, l, c, i0, d
    cdef f64 kap, rl, g
    for k in range(N):
        out[k] = 0.0
    for t in range(offsets[m], offsets[m + 1]):
        c = cutoffs[t]
        if codes[t] == 0:      # CONSTANT
            for k in range(c):
                out[k] += vecs[t * N + k]
        elif codes[t] == 1:    # MEAN_REV
            kap = f0s[t]
            for k in range(c):
                out[k] += kap * (vecs[t * N + k] - r[k])
        elif codes[t] == 2:    # PROPORTIONAL
            i0 = i0s[t]
            if i0 < c:
                out[i0] += f0s[t] * r[i0]
        elif codes[t] == 3:    # DENSE
            for k in range(c):
                out[k] += vecs[t * N + k]
            d = dense_idx[t]
            for l in range(N):
                rl = r[l]
                for k in range(c):
                    out[k] += dense[(d * N + k) * N + l] * rl
        elif codes[t] == 4:    # GATED
            i0 = i0s[t]
            g = r[i0]
            if f0s[t] <= g and g <= f1s[t]:
                for k in range(c):
                    out[k] += vecs[t * N + k]


def run_paths_packed(
    dict pack,
    cnp.ndarray[f64, ndim=2] r0,
    cnp.ndarray[f64, ndim=3] normals,
    cnp.ndarray[i64, ndim=3] counts,
    cnp.ndarray[f64, ndim=1] decay,
    cnp.ndarray[f64, ndim=1] sqrt_scale,
    cnp.ndarray[f64, ndim=1] atom_wdt,
    cnp.ndarray[i64, ndim=1] con_idx,
    cnp.ndarray[f64, ndim=1] con_sign,
    double dt,
    double exit_tol,
    double guard,
    bint store,
):
    cdef Py_ssize_t P = r0.shape[0]
    cdef Py_ssize_t N = r0.shape[1]
    cdef Py_ssize_t S = normals.shape[1]
    cdef Py_ssize_t J = sqrt_scale.shape[0]
    cdef Py_ssize_t M = atom_wdt.shape[0]
    cdef Py_ssize_t NC = con_idx.shape[0]

    cdef cnp.ndarray[i64, ndim=1] offsets_a = np.ascontiguousarray(pack["offsets"])
    cdef cnp.ndarray[i64, ndim=1] codes_a = np.ascontiguousarray(pack["codes"])
    cdef cnp.ndarray[i64, ndim=1] cutoffs_a = np.ascontiguousarray(pack["cutoffs"])
    cdef cnp.ndarray[i64, ndim=1] i0_a = np.ascontiguousarray(pack["i0"])
    cdef cnp.ndarray[f64, ndim=1] f0_a = np.ascontiguousarray(pack["f0"])
    cdef cnp.ndarray[f64, ndim=1] f1_a = np.ascontiguousarray(pack["f1"])
    cdef cnp.ndarray[f64, ndim=2] vecs_a = np.ascontiguousarray(pack["vecs"])
    cdef cnp.ndarray[i64, ndim=1] didx_a = np.ascontiguousarray(pack["dense_idx"])
    cdef cnp.ndarray[f64, ndim=3] dense_a = np.ascontiguousarray(pack["dense"])

    r0 = np.ascontiguousarray(r0)
    normals = np.ascontiguousarray(normals)
    counts = np.ascontiguousarray(counts)

    cdef cnp.ndarray[f64, ndim=2] final = r0.copy()
    cdef cnp.ndarray[f64, ndim=1] runmin = np.full(P, np.inf)
    cdef cnp.ndarray[i64, ndim=1] first_exit = np.full(P, -1, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] diverged = np.full(P, -1, dtype=np.int64)
    cdef cnp.ndarray[f64, ndim=3] traj
    if store:
        traj = np.zeros((P, S + 1, N))
    else:
        traj = np.zeros((1, 1, 1))

    cdef cnp.ndarray[f64, ndim=1] work = np.zeros(3 * N)
    cdef f64* r = &work[0]
    cdef f64* acc = &work[N]
    cdef f64* scratch = &work[2 * N]

    cdef Py_ssize_t n_leaves = codes_a.shape[0]
    cdef const i64* offsets = &offsets_a[0]
    cdef const i64* codes = &codes_a[0] if n_leaves else NULL
    cdef const i64* cutoffs = &cutoffs_a[0] if n_leaves else NULL
    cdef const i64* i0s = &i0_a[0] if n_leaves else NULL
    cdef const f64* f0s = &f0_a[0] if n_leaves else NULL
    cdef const f64* f1s = &f1_a[0] if n_leaves else NULL
    cdef const f64* vecs = &vecs_a[0, 0] if n_leaves else NULL
    cdef const i64* didx = &didx_a[0] if n_leaves else NULL
    cdef const f64* dense = &dense_a[0, 0, 0] if dense_a.shape[0] else NULL

    cdef Py_ssize_t p, s, k, j, i, ii
    cdef f64 wj, fi, maxabs, a, margin, v, rm
    cdef i64 fe, dv

    for p in range(P):
        for k in range(N):
            r[k] = r0[p, k]
        fe = -1
        dv = -1
        rm = INFINITY
        if store:
            for k in range(N):
                traj[p, 0, k] = r[k]

        maxabs = 0.0
        for k in range(N):
            a = fabs(r[k])
            if a > maxabs:
                maxabs = a
        if maxabs > guard:
            # frozen from the start; trajectory repeats the initial state
            if store:
                for ii in range(1, S + 1):
                    for k in range(N):
                        traj[p, ii, k] = r[k]
            diverged[p] = 0
            continue

        margin = INFINITY
        for ii in range(NC):
            v = con_sign[ii] * r[con_idx[ii]]
            if v < margin:
                margin = v
        margin = margin + 0.0
        rm = margin
        if margin < -exit_tol:
            fe = 0

        for s in range(S):
            _eval_map(0, r, scratch, offsets, codes, cutoffs, i0s, f0s, f1s,
                      vecs, didx, dense, N)
            for k in range(N):
                acc[k] = r[k] + dt * scratch[k]
            for j in range(J):
                _eval_map(1 + j, r, scratch, offsets, codes, cutoffs, i0s, f0s, f1s,
                          vecs, didx, dense, N)
                wj = sqrt_scale[j] * normals[p, s, j]
                for k in range(N):
                    acc[k] += scratch[k] * wj
            for i in range(M):
                _eval_map(1 + J + i, r, scratch, offsets, codes, cutoffs, i0s, f0s, f1s,
                          vecs, didx, dense, N)
                fi = <f64>counts[p, s, i] - atom_wdt[i]
                for k in range(N):
                    acc[k] += scratch[k] * fi

            maxabs = 0.0
            for k in range(N):
                acc[k] = decay[k] * acc[k]
                a = fabs(acc[k])
                if a > maxabs:
                    maxabs = a
            if maxabs > guard:
                dv = <i64>(s + 1)
                break
            for k in range(N):
                r[k] = acc[k]

            margin = INFINITY
            for ii in range(NC):
                v = con_sign[ii] * r[con_idx[ii]]
                if v < margin:
                    margin = v
            margin = margin + 0.0
            if margin < rm:
                rm = margin
            if fe < 0 and margin < -exit_tol:
                fe = <i64>(s + 1)
            if store:
                for k in range(N):
                    traj[p, s + 1, k] = r[k]

        if store and dv >= 0:
            # freeze the trajectory at the last good state
            for ii in range(dv, S + 1):
                for k in range(N):
                    traj[p, ii, k] = r[k]

        for k in range(N):
            final[p, k] = r[k]
        runmin[p] = rm
        first_exit[p] = fe
        diverged[p] = dv

    return {
        "final": final,
        "min_margin": runmin,
        "first_exit": first_exit,
        "diverged": diverged,
        "traj": traj if store else None,
    }
