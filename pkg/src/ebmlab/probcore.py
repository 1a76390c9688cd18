"""Exact arithmetic on finite distributions.

Distributions are stored in log-space with an explicit ``-inf`` marker for
zero-probability states, so 0*log(0) terms are dropped exactly instead of
turning into NaNs.  Everything downstream (kernel tilting, trajectory
divergences, the binary-reward path) funnels through these few functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._tol import STRUCTURAL
from .errors import (
    BoundaryDivergence,
    SizeMismatch,
    SupportViolation,
    ZeroStationaryMass,
)

NEG_INF = float("-inf")


def logsumexp(log_values: np.ndarray) -> float:
    """log(sum(exp(v))) with max-subtraction; -inf entries contribute zero."""
    v = np.asarray(log_values, dtype=float)
    m = np.max(v)
    if m == NEG_INF:
        return NEG_INF
    return float(m + np.log(np.sum(np.exp(v - m))))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Distribution:
    """Probability vector over a finite label set, kept as log-probabilities.

    ``log_weights[i] == -inf`` marks an exact zero.  Construction normalizes,
    so ``exp(log_weights)`` sums to 1 within 1e-12.
    """

    log_weights: np.ndarray

    def __post_init__(self):
        lw = np.asarray(self.log_weights, dtype=float)
        if lw.ndim != 1 or lw.size < 1:
            raise ValueError("log_weights must be a nonempty 1-d vector")
        if np.any(np.isnan(lw)) or np.any(lw == np.inf):
            raise ValueError("log_weights must be finite or -inf")
        total = logsumexp(lw)
        if total == NEG_INF:
            raise ValueError("all states have zero probability")
        if abs(total) > STRUCTURAL:
            lw = lw - total
        object.__setattr__(self, "log_weights", _frozen(lw))

    @classmethod
    def from_probs(cls, probs: Iterable[float]) -> "Distribution":
        p = np.asarray(list(probs) if not isinstance(probs, np.ndarray) else probs,
                       dtype=float)
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        with np.errstate(divide="ignore"):
            lw = np.log(p)
        return cls(lw)

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        return cls(np.zeros(n))

    @classmethod
    def point_mass(cls, index: int, n: int) -> "Distribution":
        lw = np.full(n, NEG_INF)
        lw[index] = 0.0
        return cls(lw)

    @property
    def n(self) -> int:
        return self.log_weights.size

    @property
    def probs(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_weights)

    @property
    def support(self) -> np.ndarray:
        """Boolean mask of states with strictly positive probability."""
        return self.log_weights > NEG_INF

    def permuted(self, perm: np.ndarray) -> "Distribution":
        return Distribution(self.log_weights[np.asarray(perm)])


@dataclass(frozen=True)
class BernoulliRate:
    """A success probability in [0, 1] (an accuracy, an expected binary reward)."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"rate {v} outside [0, 1]")
        object.__setattr__(self, "value", v)


def _check_sizes(p: Distribution, q: Distribution) -> None:
    if p.n != q.n:
        raise SizeMismatch(f"sizes differ: {p.n} vs {q.n}")


def _check_support(p: Distribution, q: Distribution) -> None:
    if np.any(p.support & ~q.support):
        raise SupportViolation("p assigns mass to a state where q has none")


def kl_divergence(p: Distribution, q: Distribution) -> float:
    """sum p*log(p/q) over the support of p; 0*log(0) terms are dropped."""
    _check_sizes(p, q)
    _check_support(p, q)
    s = p.support
    lp = p.log_weights[s]
    return float(np.dot(np.exp(lp), lp - q.log_weights[s]))


def entropy(p: Distribution) -> float:
    """-sum p*log(p) with 0*log(0) = 0."""
    lp = p.log_weights[p.support]
    return float(-np.dot(np.exp(lp), lp))


def cross_entropy(p: Distribution, q: Distribution) -> float:
    """-sum p*log(q) over the support of p; equals entropy(p) + KL(p||q)."""
    _check_sizes(p, q)
    _check_support(p, q)
    s = p.support
    return float(-np.dot(np.exp(p.log_weights[s]), q.log_weights[s]))


def bernoulli_kl(a: BernoulliRate | float, b: BernoulliRate | float) -> float:
    """KL between Bernoulli(a) and Bernoulli(b), with exact boundary limits.

    a = b at a boundary gives 0; mass against a zero raises
    :class:`BoundaryDivergence` (which carries value = +inf).
    """
    av = a.value if isinstance(a, BernoulliRate) else BernoulliRate(a).value
    bv = b.value if isinstance(b, BernoulliRate) else BernoulliRate(b).value
    if av == bv:
        return 0.0
    if av > 0.0 and bv == 0.0:
        raise BoundaryDivergence("Bernoulli KL diverges: a > 0 against b = 0")
    if av < 1.0 and bv == 1.0:
        raise BoundaryDivergence("Bernoulli KL diverges: a < 1 against b = 1")
    total = 0.0
    if av > 0.0:
        total += av * (np.log(av) - np.log(bv))
    if av < 1.0:
        total += (1.0 - av) * (np.log1p(-av) - np.log1p(-bv))
    return float(total)


def chi_square_distance(p0: Distribution, pi: Distribution) -> float:
    """L2(pi) norm of p0/pi - 1; the initial-condition factor in mixing bounds."""
    _check_sizes(p0, pi)
    if not np.all(pi.support):
        raise ZeroStationaryMass("reference distribution must be strictly positive")
    ratio = p0.probs / pi.probs - 1.0
    return float(np.sqrt(np.dot(pi.probs, ratio * ratio)))
