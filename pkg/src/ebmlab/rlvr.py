"""Binary-reward tilt paths and their accuracy calculus.

Each prompt carries a response distribution and a 0/1 reward vector.  The
one-parameter family  pi_lam ~ pi_inst * exp(lam * r)  connects the start
(lam = 0) to the regularized optimum (lam = 1/beta).  Because the reward is
binary, everything about the path projects onto the success probability
R_lam: the KL gap to the endpoint is exactly a two-point (Bernoulli)
divergence, accuracy grows with variance R(1-R), and the gap between
cross-entropy to the target and own entropy is first-order a covariance.
The gradient-flow schedule lam(t) = (1 - exp(-beta t))/beta realizes the
same family in time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._tol import STRUCTURAL
from .errors import InvariantViolation, NegativeLambda, NonPositiveBeta
from .probcore import (
    BernoulliRate,
    Distribution,
    NEG_INF,
    bernoulli_kl,
    cross_entropy,
    entropy,
    kl_divergence,
    logsumexp,
)

_FD_LAMBDA = 1e-5
_FD_TIME = 1e-4

# Quadratic-shrink factor for the covariance approximation: halving the
# expansion parameter must shrink the error at least this much (1/4 plus
# room for higher-order contamination).
QUADRATIC_RATIO_BOUND = 0.35

# A family counts as near-premise for the trace fit when the weighted
# target accuracy clears this.
TRACE_PREMISE_MIN = 0.99

# Acceptance thresholds for the trace fit on near-premise families, frozen
# from a 380-family seeded calibration sweep (worst association observed
# -0.976, worst RMS fit residual 0.017).
TRACE_ASSOCIATION_MAX = -0.95
TRACE_FIT_RESIDUAL_MAX = 0.05


@dataclass(frozen=True)
class PromptRecord:
    """One prompt: response distribution plus its 0/1 reward vector."""

    pi_inst: Distribution
    reward: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.reward, dtype=float)
        if r.shape != (self.pi_inst.n,):
            raise ValueError("reward length must match response count")
        if not np.all((r == 0.0) | (r == 1.0)):
            raise ValueError("rewards must be exactly 0 or 1")
        r = np.ascontiguousarray(r)
        r.flags.writeable = False
        object.__setattr__(self, "reward", r)

    @property
    def degenerate(self) -> bool:
        """True when the supported responses are all-success or all-failure."""
        on_support = self.reward[self.pi_inst.support]
        return bool(np.all(on_support == 0.0) or np.all(on_support == 1.0))


@dataclass(frozen=True)
class RlvrFamily:
    """Weighted collection of prompts sharing one regularization strength."""

    prompts: tuple[PromptRecord, ...]
    prompt_weights: Distribution
    beta: float

    def __post_init__(self):
        if self.beta <= 0:
            raise NonPositiveBeta(f"beta must be > 0, got {self.beta}")
        if self.prompt_weights.n != len(self.prompts):
            raise ValueError("prompt weights must match prompt count")

    @property
    def degenerate_prompts(self) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.prompts) if p.degenerate)


@dataclass(frozen=True)
class PathPoint:
    """The family evaluated at one tilt parameter."""

    lam: float
    tilted: tuple[Distribution, ...]
    accuracies: np.ndarray
    log_partitions: np.ndarray
    delta: float

    def accuracy(self, i: int) -> BernoulliRate:
        return BernoulliRate(float(self.accuracies[i]))


@dataclass(frozen=True)
class FlowState:
    """Flow time, its schedule value, and the per-prompt multiplier."""

    t: float
    schedule_lambda: float
    lagrange: np.ndarray


def schedule_lambda(beta: float, t: float) -> float:
    """(1 - exp(-beta t)) / beta: increasing from 0 toward 1/beta."""
    return float(-np.expm1(-beta * t) / beta)


def path_point(family: RlvrFamily, lam: float) -> PathPoint:
    """Tilt every prompt by exp(lam * reward) and record the accuracies."""
    if lam < 0:
        raise NegativeLambda(f"lambda must be >= 0, got {lam}")
    tilted = []
    accs = np.empty(len(family.prompts))
    log_zs = np.empty(len(family.prompts))
    for i, prompt in enumerate(family.prompts):
        scores = prompt.pi_inst.log_weights + lam * prompt.reward
        log_z = logsumexp(scores)
        dist = Distribution(np.where(prompt.pi_inst.support, scores - log_z, NEG_INF))
        tilted.append(dist)
        accs[i] = float(np.dot(dist.probs, prompt.reward))
        log_zs[i] = log_z
    accs.flags.writeable = False
    log_zs.flags.writeable = False
    return PathPoint(
        lam=float(lam),
        tilted=tuple(tilted),
        accuracies=accs,
        log_partitions=log_zs,
        delta=1.0 / family.beta - float(lam),
    )


def target_point(family: RlvrFamily) -> PathPoint:
    """The endpoint of the path (lam = 1/beta), memoized on the family."""
    cached = getattr(family, "_target_cache", None)
    if cached is None:
        cached = path_point(family, 1.0 / family.beta)
        object.__setattr__(family, "_target_cache", cached)
    return cached


def _lambda_fd_points(lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Evaluation offsets and weights for a 1e-5-step derivative in lambda.

    Central when the parameter is far enough from 0, second-order one-sided
    otherwise (the path is only defined for lambda >= 0).
    """
    h = _FD_LAMBDA
    if lam >= h:
        return np.array([lam - h, lam + h]), np.array([-0.5 / h, 0.5 / h])
    return (
        np.array([lam, lam + h, lam + 2 * h]),
        np.array([-1.5 / h, 2.0 / h, -0.5 / h]),
    )


def accuracy_derivative_check(family: RlvrFamily, lam: float) -> float:
    """Max residual of (finite-difference dR/dlam) against R(1-R).

    Degenerate prompts sit at fixed accuracy and contribute zero residual.
    """
    if lam < 0:
        raise NegativeLambda(f"lambda must be >= 0, got {lam}")
    points, weights = _lambda_fd_points(lam)
    acc_at = np.stack([path_point(family, p).accuracies for p in points])
    fd = weights @ acc_at
    here = path_point(family, lam).accuracies
    closed_form = here * (1.0 - here)
    return float(np.max(np.abs(fd - closed_form)))


def kl_derivative_check(family: RlvrFamily, lam: float) -> float:
    """Max residual of (finite-difference d/dlam KL(target || pi_lam))
    against -(R_target - R_lam); the target is held fixed."""
    if lam < 0:
        raise NegativeLambda(f"lambda must be >= 0, got {lam}")
    star = target_point(family)
    points, weights = _lambda_fd_points(lam)

    def kl_all(point_lam: float) -> np.ndarray:
        pt = path_point(family, point_lam)
        return np.array(
            [kl_divergence(star.tilted[i], pt.tilted[i])
             for i in range(len(family.prompts))]
        )

    fd = weights @ np.stack([kl_all(p) for p in points])
    here = path_point(family, lam)
    closed_form = -(star.accuracies - here.accuracies)
    return float(np.max(np.abs(fd - closed_form)))


def bernoulli_identity_check(family: RlvrFamily, lam: float) -> float:
    """Max over prompts of | KL(target || pi_lam) - Bernoulli KL of the
    matching accuracies |.  The identity is exact for binary rewards, so the
    residual is pure roundoff."""
    star = target_point(family)
    here = path_point(family, lam)
    worst = 0.0
    for i in range(len(family.prompts)):
        full = kl_divergence(star.tilted[i], here.tilted[i])
        coarse = bernoulli_kl(
            BernoulliRate(float(star.accuracies[i])),
            BernoulliRate(float(here.accuracies[i])),
        )
        worst = max(worst, abs(full - coarse))
    return worst


def flow_solution(family: RlvrFamily, t: float) -> tuple[FlowState, PathPoint]:
    """The flow at time t: the path point at lam(t) plus the per-prompt
    normalization multiplier E[r - beta log(pi_t/pi_inst) - beta]."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    beta = family.beta
    lam_t = schedule_lambda(beta, t)
    pt = path_point(family, lam_t)
    lagrange = np.empty(len(family.prompts))
    for i, prompt in enumerate(family.prompts):
        s = prompt.pi_inst.support
        log_ratio = pt.tilted[i].log_weights[s] - prompt.pi_inst.log_weights[s]
        inner = prompt.reward[s] - beta * log_ratio - beta
        lagrange[i] = float(np.dot(pt.tilted[i].probs[s], inner))
    lagrange.flags.writeable = False
    return FlowState(t=float(t), schedule_lambda=lam_t, lagrange=lagrange), pt


def flow_ode_residual(family: RlvrFamily, t: float) -> float:
    """Max residual of the flow equation in log form.

    Compares a central finite difference of log pi_t against
    r - beta log(pi_t/pi_inst) - beta - multiplier, which collapses to
    exp(-beta t) (r - R_t).  Zero-probability responses stay at zero along
    the whole path and are excluded.
    """
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    h = min(_FD_TIME, t / 2.0)
    state, pt = flow_solution(family, t)
    _, back = flow_solution(family, t - h)
    _, fwd = flow_solution(family, t + h)
    worst = 0.0
    for i, prompt in enumerate(family.prompts):
        s = prompt.pi_inst.support
        fd = (fwd.tilted[i].log_weights[s] - back.tilted[i].log_weights[s]) / (2 * h)
        log_ratio = pt.tilted[i].log_weights[s] - prompt.pi_inst.log_weights[s]
        rhs = (
            prompt.reward[s]
            - family.beta * log_ratio
            - family.beta
            - state.lagrange[i]
        )
        worst = max(worst, float(np.max(np.abs(fd - rhs))))
    return worst


def entropy_gap(family: RlvrFamily, lam: float) -> np.ndarray:
    """Per prompt: cross-entropy from the target minus own entropy."""
    star = target_point(family)
    here = path_point(family, lam)
    return np.array(
        [
            cross_entropy(star.tilted[i], here.tilted[i]) - entropy(here.tilted[i])
            for i in range(len(family.prompts))
        ]
    )


def _gap_covariance(family: RlvrFamily, pt: PathPoint) -> np.ndarray:
    """Cov under pi_lam of (log pi_lam, reward), per prompt."""
    out = np.empty(len(family.prompts))
    for i, prompt in enumerate(family.prompts):
        s = prompt.pi_inst.support
        p = pt.tilted[i].probs[s]
        lw = pt.tilted[i].log_weights[s]
        r = prompt.reward[s]
        out[i] = float(np.dot(p, lw * r) - np.dot(p, lw) * np.dot(p, r))
    return out


@dataclass(frozen=True)
class EntropyGapScaling:
    """Error of the first-order covariance approximation at one expansion
    parameter and at its half."""

    delta: float
    err_at_delta: float
    err_at_half: float

    @property
    def ratio(self) -> float:
        if self.err_at_delta == 0.0:
            return 0.0
        return self.err_at_half / self.err_at_delta


def entropy_gap_approx_check(family: RlvrFamily, lam: float) -> EntropyGapScaling:
    """Check that the covariance approximation of the entropy gap is
    second-order accurate.

    At distance delta = 1/beta - lam from the endpoint, the approximation is
    -delta * Cov(log pi_lam, reward).  Halving delta must shrink the worst
    error by at least QUADRATIC_RATIO_BOUND (plus 1e-12 slack).
    """
    if lam < 0:
        raise NegativeLambda(f"lambda must be >= 0, got {lam}")
    delta = 1.0 / family.beta - lam
    if abs(delta) > 0.5:
        raise ValueError(f"|delta| = {abs(delta)} exceeds 0.5")

    def worst_err(d: float) -> float:
        at = 1.0 / family.beta - d
        pt = path_point(family, at)
        exact = entropy_gap(family, at)
        approx = -d * _gap_covariance(family, pt)
        return float(np.max(np.abs(exact - approx)))

    err_full = worst_err(delta)
    err_half = worst_err(delta / 2.0)
    if err_half > QUADRATIC_RATIO_BOUND * err_full + STRUCTURAL:
        raise InvariantViolation(
            f"entropy-gap error shrank only {err_full:.3e} -> {err_half:.3e}"
        )
    return EntropyGapScaling(delta=delta, err_at_delta=err_full, err_at_half=err_half)


def likelihood_ratio(family: RlvrFamily, lam: float) -> list[np.ndarray]:
    """Per prompt, the density ratio target/pi_lam on the support:
    (Z_lam/Z_target) exp(delta * reward).  Its mean under pi_lam is 1."""
    star = target_point(family)
    here = path_point(family, lam)
    out = []
    for i, prompt in enumerate(family.prompts):
        s = prompt.pi_inst.support
        log_w = (
            here.log_partitions[i]
            - star.log_partitions[i]
            + here.delta * prompt.reward[s]
        )
        out.append(np.exp(log_w))
    return out


def jensen_aggregate_check(family: RlvrFamily, lam: float) -> float:
    """Weighted-average Bernoulli KL minus the Bernoulli KL of the averages.

    Convexity makes this nonnegative; equality for a single prompt.  Raises
    if the margin dips below -1e-12.
    """
    star = target_point(family)
    here = path_point(family, lam)
    w = family.prompt_weights.probs
    per_prompt = np.array(
        [
            bernoulli_kl(
                BernoulliRate(float(star.accuracies[i])),
                BernoulliRate(float(here.accuracies[i])),
            )
            for i in range(len(family.prompts))
        ]
    )
    lhs = float(np.dot(w, per_prompt))
    rhs = bernoulli_kl(
        BernoulliRate(float(np.dot(w, star.accuracies))),
        BernoulliRate(float(np.dot(w, here.accuracies))),
    )
    margin = lhs - rhs
    if margin < -STRUCTURAL:
        raise InvariantViolation(f"aggregation margin {margin:.3e} below -1e-12")
    return margin


@dataclass(frozen=True)
class EntropyTraceFit:
    """Accuracy/entropy trace along the discretized flow schedule, with an
    affine fit of accuracy against exp(next-step mean entropy).

    The fit is only meaningful near the all-correct premise; `applicable`
    records whether this family qualifies (weighted target accuracy at least
    TRACE_PREMISE_MIN and a non-constant entropy trace).
    """

    ns: np.ndarray
    lambdas: np.ndarray
    mean_accuracy: np.ndarray
    mean_entropy: np.ndarray
    mean_kl_to_target: np.ndarray
    fitted_a: float
    fitted_b: float
    fit_residual: float
    association: float
    mean_target_accuracy: float
    applicable: bool
    reason: str


def entropy_accuracy_trace(family: RlvrFamily, n_steps: int) -> EntropyTraceFit:
    """Walk lam_n = (1 - exp(-beta n))/beta and fit R_n ~ b - a exp(H_{n+1}).

    R_n and H_n are prompt-weighted means of accuracy and entropy; the fit
    pairs each R_n with the entropy one step later and solves the
    two-parameter least-squares problem in closed form.
    """
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    w = family.prompt_weights.probs
    star = target_point(family)
    ns = np.arange(n_steps + 1)
    lambdas = np.array([schedule_lambda(family.beta, float(n)) for n in ns])
    mean_r = np.empty(n_steps + 1)
    mean_h = np.empty(n_steps + 1)
    mean_kl = np.empty(n_steps + 1)
    for j, lam in enumerate(lambdas):
        pt = path_point(family, float(lam))
        mean_r[j] = float(np.dot(w, pt.accuracies))
        mean_h[j] = float(np.dot(w, [entropy(d) for d in pt.tilted]))
        mean_kl[j] = float(
            np.dot(
                w,
                [kl_divergence(star.tilted[i], pt.tilted[i])
                 for i in range(len(family.prompts))],
            )
        )

    y = mean_r[:-1]
    u = np.exp(mean_h[1:])
    u_var = float(np.var(u))
    target_acc = float(np.dot(w, star.accuracies))

    if u_var <= STRUCTURAL:
        fitted_a, fitted_b, residual, assoc = 0.0, float(np.mean(y)), 0.0, 0.0
        applicable, reason = False, "entropy trace is constant"
    else:
        slope = float(np.cov(u, y, bias=True)[0, 1] / u_var)
        fitted_a = -slope
        fitted_b = float(np.mean(y) + fitted_a * np.mean(u))
        pred = fitted_b - fitted_a * u
        residual = float(np.sqrt(np.mean((y - pred) ** 2)))
        assoc = float(np.corrcoef(u, y)[0, 1])
        if target_acc < TRACE_PREMISE_MIN:
            applicable, reason = False, (
                f"weighted target accuracy {target_acc:.4f} below {TRACE_PREMISE_MIN}"
            )
        else:
            applicable, reason = True, ""

    for arr in (ns, lambdas, mean_r, mean_h, mean_kl):
        arr.flags.writeable = False
    return EntropyTraceFit(
        ns=ns,
        lambdas=lambdas,
        mean_accuracy=mean_r,
        mean_entropy=mean_h,
        mean_kl_to_target=mean_kl,
        fitted_a=fitted_a,
        fitted_b=fitted_b,
        fit_residual=residual,
        association=assoc,
        mean_target_accuracy=target_acc,
        applicable=applicable,
        reason=reason,
    )


def family_objective(family: RlvrFamily, policies: tuple[Distribution, ...]) -> float:
    """Weighted objective  E_x [ E_pi[r] - beta KL(pi || pi_inst) ]."""
    w = family.prompt_weights.probs
    total = 0.0
    for i, prompt in enumerate(family.prompts):
        expected = float(np.dot(policies[i].probs, prompt.reward))
        total += w[i] * (expected - family.beta * kl_divergence(policies[i], prompt.pi_inst))
    return total
