"""Reversible transition kernels with explicit potentials.

The pipeline: a Metropolis kernel over a symmetric proposal graph targets a
base distribution exactly; tilting its rows by exp(improvement/beta) yields
a new kernel that is again reversible, now with respect to
pi ~ exp(-potential) for an explicitly constructed potential.  The rest of
the module interrogates that structure: recovering the potential from
log-ratios, evolving the master equation with a KL trace, one-step drift,
and exact + simulated hitting times to low-potential target sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._tol import BOUND_SLACK, ITERATIVE, PIVOT_MIN, STRUCTURAL
from .errors import (
    AsymmetricSupport,
    CycleInconsistency,
    DisconnectedGraph,
    EmptyTargetSet,
    InvariantViolation,
    NonPositiveBeta,
    NumericalFailure,
    SingularSystem,
)
from .probcore import Distribution, kl_divergence, logsumexp


# --------------------------------------------------------------------------
# scenario record
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainScenario:
    """Inputs for one kernel construction: base distribution, proposal graph,
    improvement potential, inverse regularization strength, and the seed the
    instance was drawn from."""

    n_states: int
    p_data: Distribution
    proposal_graph: np.ndarray
    h: np.ndarray
    beta: float
    seed: int

    def __post_init__(self):
        n = self.n_states
        adj = np.asarray(self.proposal_graph, dtype=bool)
        if adj.shape != (n, n):
            raise ValueError("proposal graph must be n x n")
        if np.any(np.diagonal(adj)):
            raise ValueError("proposal graph must not contain self-loops")
        if not np.array_equal(adj, adj.T):
            raise ValueError("proposal graph must be symmetric")
        if not _connected(adj):
            raise DisconnectedGraph("proposal graph is not connected")
        if self.p_data.n != n or not np.all(self.p_data.support):
            raise ValueError("p_data must be strictly positive over all states")
        h = np.asarray(self.h, dtype=float)
        if h.shape != (n,) or not np.all(np.isfinite(h)):
            raise ValueError("h must be a finite length-n vector")
        if self.beta <= 0:
            raise NonPositiveBeta(f"beta must be > 0, got {self.beta}")
        object.__setattr__(self, "proposal_graph", _readonly(adj))
        object.__setattr__(self, "h", _readonly(h))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def _connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        f = stack.pop()
        for g in np.nonzero(adj[f])[0]:
            if not seen[g]:
                seen[g] = True
                stack.append(int(g))
    return bool(seen.all())


# --------------------------------------------------------------------------
# chain record
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ReversibleChain:
    """Row-stochastic kernel plus the potential it is reversible against.

    ``kernel[f, g]`` is the probability of moving f -> g.  ``stationary`` is
    the normalization of exp(-potential).  ``per_state_log_partition`` holds
    the row normalizers when the chain came from tilting; directly
    constructed chains carry None there.
    """

    kernel: np.ndarray
    potential: np.ndarray
    stationary: Distribution
    per_state_log_partition: np.ndarray | None = None

    def __post_init__(self):
        k = np.asarray(self.kernel, dtype=float)
        v = np.asarray(self.potential, dtype=float)
        n = k.shape[0]
        if k.shape != (n, n) or v.shape != (n,):
            raise ValueError("kernel must be square and potential length-n")
        row_err = np.max(np.abs(k.sum(axis=1) - 1.0))
        if row_err > STRUCTURAL:
            raise InvariantViolation(f"kernel rows sum to 1 off by {row_err:.3e}")
        object.__setattr__(self, "kernel", _readonly(k))
        object.__setattr__(self, "potential", _readonly(v))
        db = detailed_balance_residual(self)
        if db > STRUCTURAL:
            raise InvariantViolation(f"detailed balance residual {db:.3e}")
        lr = log_ratio_residual(self)
        if lr > ITERATIVE:
            raise InvariantViolation(f"potential log-ratio residual {lr:.3e}")

    @property
    def n(self) -> int:
        return self.kernel.shape[0]


def detailed_balance_residual(chain: ReversibleChain) -> float:
    """max over pairs of |pi(f)T(g|f) - pi(g)T(f|g)|."""
    flow = chain.stationary.probs[:, None] * chain.kernel
    return float(np.max(np.abs(flow - flow.T)))


def log_ratio_residual(chain: ReversibleChain) -> float:
    """max over supported off-diagonal pairs of
    |log T(g|f) - log T(f|g) - (V(f) - V(g))|."""
    k, v = chain.kernel, chain.potential
    both = (k > 0) & (k.T > 0)
    np.fill_diagonal(both, False)
    if not both.any():
        return 0.0
    f_idx, g_idx = np.nonzero(both)
    lr = np.log(k[f_idx, g_idx]) - np.log(k[g_idx, f_idx])
    return float(np.max(np.abs(lr - (v[f_idx] - v[g_idx]))))


def stationarity_residual(chain: ReversibleChain) -> float:
    """L1 norm of pi.T - pi."""
    pi = chain.stationary.probs
    return float(np.sum(np.abs(pi @ chain.kernel - pi)))


# --------------------------------------------------------------------------
# kernel construction
# --------------------------------------------------------------------------


def build_pretrained_kernel(scenario: ChainScenario) -> np.ndarray:
    """Metropolis kernel over the proposal graph, reversible against p_data.

    Proposals pick a neighbor uniformly; acceptance is
    min(1, p_data(g) deg(f) / (p_data(f) deg(g))); rejected mass stays on
    the diagonal.  Reversibility holds exactly on every supported pair.
    """
    adj = scenario.proposal_graph
    n = scenario.n_states
    deg = adj.sum(axis=1).astype(float)
    p = scenario.p_data.probs
    ratio = (p[None, :] * deg[:, None]) / (p[:, None] * deg[None, :])
    kernel = np.where(adj, np.minimum(1.0, ratio) / deg[:, None], 0.0)
    np.fill_diagonal(kernel, 0.0)
    np.fill_diagonal(kernel, np.maximum(0.0, 1.0 - kernel.sum(axis=1)))
    return kernel


def pretrained_log_ratio_residual(pretrained: np.ndarray, p_data: Distribution) -> float:
    """max over supported pairs of
    |log pre(g|f)/pre(f|g) - log p_data(g)/p_data(f)|.

    Zero (to roundoff) for any Metropolis kernel built against p_data; this
    is the machine-checkable form of the base-model symmetry requirement.
    """
    pre = np.asarray(pretrained, dtype=float)
    both = (pre > 0) & (pre.T > 0)
    np.fill_diagonal(both, False)
    if not both.any():
        return 0.0
    f_idx, g_idx = np.nonzero(both)
    lhs = np.log(pre[f_idx, g_idx]) - np.log(pre[g_idx, f_idx])
    lp = p_data.log_weights
    return float(np.max(np.abs(lhs - (lp[g_idx] - lp[f_idx]))))


def tilt_kernel(pretrained: np.ndarray, h, beta: float) -> ReversibleChain:
    """Tilt each kernel row by exp((h(g) - h(f)) / beta) and renormalize.

    The base distribution is recovered from the pretrained kernel's own
    log-ratios (it is reversible by contract), so the resulting potential

        V(s) = -2 h(s)/beta - log p_data(s) - log Z(s)

    is built entirely from the function's inputs.  The factor 2 is what the
    antisymmetrized improvement reward h(g) - h(f) forces.
    """
    if beta <= 0:
        raise NonPositiveBeta(f"beta must be > 0, got {beta}")
    pre = np.asarray(pretrained, dtype=float)
    n = pre.shape[0]
    h = np.asarray(h, dtype=float)
    if h.shape != (n,):
        raise ValueError("h must match kernel size")

    v_pre = recover_potential(pre)
    log_p_data = -v_pre - logsumexp(-v_pre)

    with np.errstate(divide="ignore"):
        log_pre = np.log(pre)
    scores = log_pre + (h[None, :] - h[:, None]) / beta
    row_max = np.max(scores, axis=1)
    log_z = row_max + np.log(np.sum(np.exp(scores - row_max[:, None]), axis=1))
    kernel = np.exp(scores - log_z[:, None])

    potential = -2.0 * h / beta - log_p_data - log_z
    return ReversibleChain(
        kernel=kernel,
        potential=potential,
        stationary=stationary_from_potential(potential),
        per_state_log_partition=_readonly(log_z),
    )


def recover_potential(kernel: np.ndarray) -> np.ndarray:
    """Integrate log T(g|f)/T(f|g) over a spanning tree; V(0) = 0.

    Every non-tree edge must close consistently within 1e-9, otherwise the
    kernel is not reversible and :class:`CycleInconsistency` reports the
    worst residual.  One-sided zeros are :class:`AsymmetricSupport`.
    """
    k = np.asarray(kernel, dtype=float)
    n = k.shape[0]
    off = ~np.eye(n, dtype=bool)
    fwd = (k > 0) & off
    if np.any(fwd & ~fwd.T):
        raise AsymmetricSupport("kernel support is not symmetric")
    support = fwd & fwd.T
    if not _connected(support | np.eye(n, dtype=bool)):
        raise DisconnectedGraph("kernel support graph is not connected")

    log_ratio = np.zeros_like(k)
    f_idx, g_idx = np.nonzero(support)
    log_ratio[f_idx, g_idx] = np.log(k[f_idx, g_idx]) - np.log(k[g_idx, f_idx])

    v = np.full(n, np.nan)
    v[0] = 0.0
    stack = [0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    while stack:
        f = stack.pop()
        for g in np.nonzero(support[f])[0]:
            if not seen[g]:
                seen[g] = True
                v[g] = v[f] - log_ratio[f, g]
                stack.append(int(g))

    closure = np.abs(log_ratio[f_idx, g_idx] - (v[f_idx] - v[g_idx]))
    worst = float(np.max(closure)) if closure.size else 0.0
    if worst > BOUND_SLACK:
        raise CycleInconsistency(
            f"log-ratio cycles do not close (worst residual {worst:.3e})", worst
        )
    return v


def stationary_from_potential(potential) -> Distribution:
    """Normalize exp(-V); invariant under additive shifts of V."""
    v = np.asarray(potential, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("potential must be finite")
    return Distribution(-v - logsumexp(-v))


# --------------------------------------------------------------------------
# dynamics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Master-equation snapshots with their divergence and potential traces."""

    snapshots: tuple[Distribution, ...]
    kl_trace: np.ndarray
    expected_potential_trace: np.ndarray


def evolve(chain: ReversibleChain, p0: Distribution, steps: int) -> Trajectory:
    """Iterate P_{t+1}(g) = sum_f P_t(f) T(g|f) for `steps` steps.

    Records KL(P_t || pi) and E_{P_t}[V] at every step, including t = 0.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if p0.n != chain.n:
        raise ValueError("start distribution size mismatch")
    snapshots = [p0]
    p = p0.probs
    for _ in range(steps):
        p = p @ chain.kernel
        snapshots.append(Distribution.from_probs(p))
    kl = np.array([kl_divergence(s, chain.stationary) for s in snapshots])
    ev = np.array([float(np.dot(s.probs, chain.potential)) for s in snapshots])
    return Trajectory(
        snapshots=tuple(snapshots),
        kl_trace=_readonly(kl),
        expected_potential_trace=_readonly(ev),
    )


def drift_vector(chain: ReversibleChain) -> np.ndarray:
    """Expected one-step change of the potential from each state."""
    return chain.kernel @ chain.potential - chain.potential


def drift(chain: ReversibleChain, f: int) -> float:
    """sum_g T(g|f) (V(g) - V(f))."""
    if not (0 <= f < chain.n):
        raise ValueError("state index out of range")
    return float(drift_vector(chain)[f])


# --------------------------------------------------------------------------
# hitting times
# --------------------------------------------------------------------------


def _solve_linear(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting; pivots below threshold
    raise SingularSystem."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    n = b.size
    for col in range(n):
        piv = int(np.argmax(np.abs(a[col:, col]))) + col
        if abs(a[piv, col]) < PIVOT_MIN:
            raise SingularSystem(f"pivot below {PIVOT_MIN} at column {col}")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        factors = a[col + 1:, col] / a[col, col]
        a[col + 1:, col:] -= factors[:, None] * a[col, col:]
        b[col + 1:] -= factors * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - np.dot(a[row, row + 1:], x[row + 1:])) / a[row, row]
    return x


def expected_hitting_times(chain: ReversibleChain, target_set) -> np.ndarray:
    """Exact expected first-entry times into the target set, per start state.

    First-step analysis: E_f = 0 on the target, E_f = 1 + sum_g T(g|f) E_g
    elsewhere, solved densely.
    """
    targets = np.asarray(sorted(set(int(s) for s in target_set)), dtype=int)
    if targets.size == 0:
        raise EmptyTargetSet("target set must be nonempty")
    if targets.min() < 0 or targets.max() >= chain.n:
        raise ValueError("target state index out of range")
    outside = np.setdiff1d(np.arange(chain.n), targets)
    times = np.zeros(chain.n)
    if outside.size:
        sub = chain.kernel[np.ix_(outside, outside)]
        a = np.eye(outside.size) - sub
        times[outside] = _solve_linear(a, np.ones(outside.size))
    return times


@dataclass(frozen=True)
class HittingAnalysis:
    """Exact hitting times against the drift-based upper bound.

    ``condition_holds`` is True when every state outside the target has
    drift <= -gamma for the reported gamma > 0; only then are the bound
    values meaningful (they are +inf otherwise).
    """

    threshold_b: float
    target_set: tuple[int, ...]
    gamma: float
    expected_times: np.ndarray
    bound_values: np.ndarray
    condition_holds: bool


def hitting_bound_check(chain: ReversibleChain, threshold_b: float) -> HittingAnalysis:
    """Target the sublevel set B = {s : V(s) <= b}; compare exact expected
    hitting times against (V(f) - min V) / gamma when the uniform negative
    drift condition holds outside B."""
    v = chain.potential
    targets = np.nonzero(v <= threshold_b)[0]
    if targets.size == 0:
        raise EmptyTargetSet(f"no states with potential <= {threshold_b}")
    times = expected_hitting_times(chain, targets)
    outside = np.setdiff1d(np.arange(chain.n), targets)
    m = float(np.min(v))
    if outside.size == 0:
        gamma = float("inf")
        condition = True
        bounds = np.zeros(chain.n)
    else:
        gamma = float(np.min(-drift_vector(chain)[outside]))
        condition = gamma > 0
        bounds = (v - m) / gamma if condition else np.full(chain.n, np.inf)
    if condition and outside.size:
        worst = float(np.max(times[outside] - bounds[outside]))
        if worst > BOUND_SLACK:
            raise InvariantViolation(
                f"hitting-time bound violated by {worst:.3e}"
            )
    return HittingAnalysis(
        threshold_b=float(threshold_b),
        target_set=tuple(int(t) for t in targets),
        gamma=gamma,
        expected_times=_readonly(times),
        bound_values=_readonly(bounds),
        condition_holds=bool(condition),
    )


def mc_hitting_estimate(
    chain: ReversibleChain,
    target_set,
    start: int,
    n_replicas: int,
    seed: int,
    max_steps: int = 1_000_000,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the hitting time from `start`.

    Per-replica random streams are derived from (seed, replica index), so
    the estimate is reproducible regardless of how work is scheduled.
    """
    mask = np.zeros(chain.n, dtype=np.uint8)
    mask[np.asarray(sorted(set(int(s) for s in target_set)), dtype=int)] = 1
    if not mask.any():
        raise EmptyTargetSet("target set must be nonempty")
    cum = np.cumsum(chain.kernel, axis=1)
    counts, capped = kernels.simulate_hitting_times(
        cum, mask, int(start), int(n_replicas), int(seed) & (2**64 - 1), int(max_steps)
    )
    if capped:
        raise NumericalFailure(f"{capped} replicas exceeded the step cap")
    mean = float(np.mean(counts))
    stderr = float(np.std(counts, ddof=1) / np.sqrt(n_replicas)) if n_replicas > 1 else 0.0
    return mean, stderr
