"""Exception hierarchy.

Every error the library raises derives from :class:`LabError`, split into
input-contract violations, numerical failures, and broken mathematical
invariants.  The CLI maps these onto distinct exit codes.
"""

from __future__ import annotations


class LabError(Exception):
    """Base class for all library errors."""


# --- input / contract violations -------------------------------------------


class SizeMismatch(LabError):
    """Two vectors that must share a length do not."""


class SupportViolation(LabError):
    """p places mass where q has none, so p-against-q divergences diverge."""


class ZeroStationaryMass(LabError):
    """Chi-square distance needs a strictly positive reference distribution."""


class NonPositiveBeta(LabError):
    """Inverse-temperature style coefficients must be > 0."""


class NegativeLambda(LabError):
    """Tilt-path parameters must be >= 0."""


class DisconnectedGraph(LabError):
    """Proposal or support graph is not connected."""


class AsymmetricSupport(LabError):
    """T(g|f) > 0 but T(f|g) = 0 for some pair; no potential can exist."""


class EmptyTargetSet(LabError):
    """Hitting-time analysis requires a nonempty target set."""


# --- configuration / IO ------------------------------------------------------


class ConfigError(LabError):
    """Base class for experiment-config problems (distinct CLI exit code)."""


class MalformedJson(ConfigError):
    """Config file is not a UTF-8 JSON object."""


class UnknownKey(ConfigError):
    """Config carries a key the schema does not define."""


class RangeViolation(ConfigError):
    """A config value is outside its documented range."""


class IoFailure(LabError):
    """Filesystem write failed."""


# --- numerical failures ------------------------------------------------------


class NumericalFailure(LabError):
    """Base class for solver breakdowns (distinct CLI exit code)."""


class SingularSystem(NumericalFailure):
    """Linear solve hit a pivot below threshold (e.g. unreachable target)."""


class NoConvergence(NumericalFailure):
    """Iterative eigensolver exhausted its sweep budget."""


class DegenerateGap(NumericalFailure):
    """Spectral gap is numerically zero; gap-normalized bounds undefined."""


# --- broken mathematics ------------------------------------------------------


class InvariantViolation(LabError):
    """A proven property failed numerically beyond its slack."""


class CycleInconsistency(InvariantViolation):
    """Log-ratio integration around a cycle does not close; chain is not
    reversible.  Carries the worst cycle residual."""

    def __init__(self, message: str, worst_residual: float):
        super().__init__(message)
        self.worst_residual = worst_residual


class NotReversible(InvariantViolation):
    """Similarity-transformed kernel is not symmetric within tolerance."""


class BoundaryDivergence(InvariantViolation):
    """A Bernoulli divergence is +infinity (mass against a zero).  The
    infinite value is carried rather than returned as a float."""

    def __init__(self, message: str):
        super().__init__(message)
        self.value = float("inf")
