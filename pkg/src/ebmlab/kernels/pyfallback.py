"""Pure-NumPy implementations of the hot kernels.

Reference semantics for the compiled extension: same rotation order, same
update formulas, same per-replica splitmix64 draw sequence.  Used whenever
the extension is unavailable or EBMLAB_PURE_PYTHON is set; the benchmark
compares the two backends directly.
"""

from __future__ import annotations

import numpy as np

_PHI = np.uint64(0x9E3779B97F4A7C15)
_STREAM = np.uint64(0xD1B54A32D192ED03)
_INV_2_53 = 1.0 / 9007199254740992.0


def _offdiag_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diagonal(a))
    return float(np.sqrt(np.sum(off * off)))


def jacobi_eigh(s_matrix, tol: float, max_sweeps: int):
    """Full cyclic Jacobi on a symmetric matrix.

    Returns (diagonal, rotation matrix, sweeps used, final off-diagonal
    Frobenius norm).
    """
    a = np.array(s_matrix, dtype=np.float64, order="C", copy=True)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError("matrix must be square")
    q = np.eye(n)

    sweep = 0
    off = _offdiag_norm(a)
    while off > tol and sweep < max_sweeps:
        for p in range(n - 1):
            for r in range(p + 1, n):
                apq = a[p, r]
                if apq == 0.0:
                    continue
                app = a[p, p]
                arr = a[r, r]
                theta = (arr - app) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_r = a[:, r].copy()
                new_p = c * col_p - s * col_r
                new_r = s * col_p + c * col_r
                a[:, p] = new_p
                a[p, :] = new_p
                a[:, r] = new_r
                a[r, :] = new_r
                a[p, p] = app - t * apq
                a[r, r] = arr + t * apq
                a[p, r] = 0.0
                a[r, p] = 0.0
                qp = q[:, p].copy()
                qr = q[:, r].copy()
                q[:, p] = c * qp - s * qr
                q[:, r] = s * qp + c * qr
        off = _offdiag_norm(a)
        sweep += 1

    return np.diagonal(a).copy(), q, sweep, off


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def simulate_hitting_times(cum_rows, target_mask, start: int, n_replicas: int,
                           seed: int, max_steps: int):
    """Step independent replicas until they enter the target set.

    Vectorized across active replicas; the draw sequence per replica is
    identical to the compiled kernel's.  Returns (steps per replica, number
    of replicas that hit the step cap).
    """
    cum = np.ascontiguousarray(cum_rows, dtype=np.float64)
    mask = np.ascontiguousarray(target_mask, dtype=bool)
    n = cum.shape[0]
    if mask.shape[0] != n:
        raise ValueError("target mask size mismatch")
    if not (0 <= start < n):
        raise ValueError("start state out of range")

    reps = np.arange(1, n_replicas + 1, dtype=np.uint64)
    rng_state = _mix64(np.uint64(seed) + reps * _STREAM)
    states = np.full(n_replicas, start, dtype=np.int64)
    steps = np.zeros(n_replicas, dtype=np.int64)
    active = np.nonzero(~mask[states])[0]

    it = 0
    while active.size and it < max_steps:
        rng_state[active] += _PHI
        z = _mix64(rng_state[active])
        u = (z >> np.uint64(11)).astype(np.float64) * _INV_2_53
        rows = cum[states[active]]
        hit = u[:, None] < rows
        found = hit.any(axis=1)
        nxt = np.where(found, hit.argmax(axis=1), n - 1)
        states[active] = nxt
        steps[active] += 1
        active = active[~mask[nxt]]
        it += 1

    capped = int(active.size)
    return steps, capped
