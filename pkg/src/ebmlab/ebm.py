"""Reward tilting: the closed-form optimum of a KL-regularized objective.

Tilting a reference distribution by exp(reward/beta) and renormalizing gives
the unique maximizer of  E[reward] - beta * KL(policy || reference).  The
value of the objective at the tilt is beta * log_partition, and the
suboptimality of any other policy is exactly beta times its KL distance to
the tilt; ``suboptimality_identity_residual`` measures how far the two
independently computed sides are from each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveBeta, SizeMismatch
from .probcore import Distribution, NEG_INF, kl_divergence, logsumexp


def _check_inputs(reference: Distribution, reward: np.ndarray, beta: float) -> np.ndarray:
    if beta <= 0:
        raise NonPositiveBeta(f"beta must be > 0, got {beta}")
    r = np.asarray(reward, dtype=float)
    if r.ndim != 1 or r.size != reference.n:
        raise SizeMismatch(f"reward size {r.size} vs reference size {reference.n}")
    if not np.all(np.isfinite(r)):
        raise ValueError("reward entries must be finite")
    return r


@dataclass(frozen=True)
class TiltedPolicy:
    """A reference distribution tilted by exp(reward/beta)."""

    reference: Distribution
    reward: np.ndarray
    beta: float
    log_partition: float
    tilted: Distribution


def log_partition(reference: Distribution, reward, beta: float) -> float:
    """log sum_y reference(y) * exp(reward(y)/beta), via stabilized log-sum-exp."""
    r = _check_inputs(reference, reward, beta)
    return logsumexp(reference.log_weights + r / beta)


def tilt(reference: Distribution, reward, beta: float) -> TiltedPolicy:
    """Normalize reference * exp(reward/beta); zero-mass states stay at zero."""
    r = _check_inputs(reference, reward, beta)
    scores = reference.log_weights + r / beta
    log_z = logsumexp(scores)
    lw = np.where(reference.support, scores - log_z, NEG_INF)
    return TiltedPolicy(
        reference=reference,
        reward=np.array(r),
        beta=float(beta),
        log_partition=log_z,
        tilted=Distribution(lw),
    )


def objective(policy: Distribution, reference: Distribution, reward, beta: float) -> float:
    """E_policy[reward] - beta * KL(policy || reference)."""
    r = _check_inputs(reference, reward, beta)
    if policy.n != reference.n:
        raise SizeMismatch(f"policy size {policy.n} vs reference size {reference.n}")
    expected_reward = float(np.dot(policy.probs, r))
    return expected_reward - beta * kl_divergence(policy, reference)


def suboptimality_identity_residual(
    policy: Distribution, reference: Distribution, reward, beta: float
) -> float:
    """| (J(tilt) - J(policy)) - beta * KL(policy || tilt) |.

    Both sides are computed independently: the left from two objective
    evaluations, the right from a fresh tilt.  Zero (up to roundoff) for
    every valid input.
    """
    best = tilt(reference, reward, beta)
    gap = objective(best.tilted, reference, reward, beta) - objective(
        policy, reference, reward, beta
    )
    return abs(gap - beta * kl_divergence(policy, best.tilted))
