# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: cyclic Jacobi eigensolver and hitting-time sampler.

Mirrors :mod:`ebmlab.kernels.pyfallback` operation for operation; the
fallback is the reference, this is the fast path.  The hitting-time sampler
uses the same splitmix64 draw sequence as the fallback, so both backends
produce identical step counts for a given seed.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


cdef inline double _offdiag_norm(double[:, ::1] a, Py_ssize_t n) nogil:
    cdef Py_ssize_t i, j
    cdef double total = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                total += a[i, j] * a[i, j]
    return sqrt(total)


def jacobi_eigh(s_matrix, double tol, int max_sweeps):
    """Full cyclic Jacobi on a symmetric matrix.

    Returns (diagonal, rotation matrix, sweeps used, final off-diagonal
    Frobenius norm).  The caller decides whether the final norm counts as
    converged.
    """
    a_arr = np.array(s_matrix, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = a_arr.shape[0]
    if a_arr.ndim != 2 or a_arr.shape[1] != n:
        raise ValueError("matrix must be square")
    q_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] q = q_arr

    cdef Py_ssize_t p, r, k
    cdef int sweep = 0
    cdef double off = _offdiag_norm(a, n)
    cdef double app, arr_, apq, theta, t, c, s, akp, akq

    while off > tol and sweep < max_sweeps:
        with nogil:
            for p in range(n - 1):
                for r in range(p + 1, n):
                    apq = a[p, r]
                    if apq == 0.0:
                        continue
                    app = a[p, p]
                    arr_ = a[r, r]
                    theta = (arr_ - app) / (2.0 * apq)
                    t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(n):
                        akp = a[k, p]
                        akq = a[k, r]
                        a[k, p] = c * akp - s * akq
                        a[k, r] = s * akp + c * akq
                    for k in range(n):
                        akp = a[p, k]
                        akq = a[r, k]
                        a[p, k] = c * akp - s * akq
                        a[r, k] = s * akp + c * akq
                    a[p, p] = app - t * apq
                    a[r, r] = arr_ + t * apq
                    a[p, r] = 0.0
                    a[r, p] = 0.0
                    for k in range(n):
                        akp = q[k, p]
                        akq = q[k, r]
                        q[k, p] = c * akp - s * akq
                        q[k, r] = s * akp + c * akq
            off = _offdiag_norm(a, n)
        sweep += 1

    return np.diagonal(a_arr).copy(), q_arr, sweep, off


cdef inline cnp.uint64_t _mix64(cnp.uint64_t z) nogil:
    z = (z ^ (z >> 30)) * <cnp.uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <cnp.uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _next_uniform(cnp.uint64_t *state) nogil:
    state[0] = state[0] + <cnp.uint64_t>0x9E3779B97F4A7C15
    return <double>(_mix64(state[0]) >> 11) * (1.0 / 9007199254740992.0)


def simulate_hitting_times(cum_rows, target_mask, int start, Py_ssize_t n_replicas,
                           cnp.uint64_t seed, long long max_steps):
    """Step independent replicas until they enter the target set.

    ``cum_rows`` are cumulative kernel rows; each replica owns a splitmix64
    stream derived from (seed, replica index).  Returns (steps per replica,
    number of replicas that hit the step cap).
    """
    cum_arr = np.ascontiguousarray(cum_rows, dtype=np.float64)
    mask_arr = np.ascontiguousarray(target_mask, dtype=np.uint8)
    cdef double[:, ::1] cum = cum_arr
    cdef cnp.uint8_t[::1] mask = mask_arr
    cdef Py_ssize_t n = cum.shape[0]
    if mask.shape[0] != n:
        raise ValueError("target mask size mismatch")
    if not (0 <= start < n):
        raise ValueError("start state out of range")

    out_arr = np.zeros(n_replicas, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t rep, g
    cdef int state
    cdef long long steps, capped = 0
    cdef double u
    cdef cnp.uint64_t rng

    with nogil:
        for rep in range(n_replicas):
            rng = _mix64(seed + (<cnp.uint64_t>(rep + 1)) * <cnp.uint64_t>0xD1B54A32D192ED03)
            state = start
            steps = 0
            while mask[state] == 0:
                if steps >= max_steps:
                    capped += 1
                    break
                u = _next_uniform(&rng)
                g = 0
                while g < n - 1 and u >= cum[state, g]:
                    g += 1
                state = <int>g
                steps += 1
            out[rep] = steps

    return out_arr, int(capped)
