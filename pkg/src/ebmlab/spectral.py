"""Spectral analysis of reversible chains.

A reversible kernel is self-adjoint on L2(pi); conjugating by sqrt(pi)
turns it into an ordinary symmetric matrix whose eigenvalues control
mixing.  This module computes that spectrum with a cyclic Jacobi solver,
reports the gap quantities, and checks the two inequalities they imply:
the geometric convergence envelope for the expected potential and the
variance bound by the Dirichlet form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._tol import (
    BOUND_SLACK,
    DEGENERATE_GAP,
    ITERATIVE,
    JACOBI_MAX_SWEEPS,
    JACOBI_OFFDIAG,
)
from .chain import ReversibleChain, evolve
from .errors import (
    DegenerateGap,
    InvariantViolation,
    NoConvergence,
    NotReversible,
    NumericalFailure,
)
from .probcore import Distribution, chi_square_distance

_RECON_TOL = 1e-8


@dataclass(frozen=True)
class SpectralReport:
    """Eigen structure of a chain plus the scalars entering its bounds.

    eigenvalues_mu: descending eigenvalues of the transition operator
    lambda2:        1 - mu_2 (second-smallest eigenvalue of I - P)
    rho:            max |mu_i| over i >= 2 (absolute-gap complement)
    variance_V:     Var_pi(V)
    dirichlet_V:    (1/2) sum_f pi(f) sum_g T(g|f) (V(f) - V(g))^2
    chi0:           chi-square distance of the start from stationarity
    """

    eigenvalues_mu: np.ndarray
    lambda2: float
    rho: float
    variance_V: float
    dirichlet_V: float
    chi0: float


def symmetrize(chain: ReversibleChain) -> np.ndarray:
    """Conjugate the kernel into symmetric form S(f,g) = sqrt(pi f/pi g) T(g|f).

    Raises :class:`NotReversible` when the result is asymmetric beyond
    tolerance; the returned matrix is exactly symmetrized for the solver.
    """
    pi = chain.stationary.probs
    s = np.sqrt(pi[:, None] / pi[None, :]) * chain.kernel
    asym = float(np.max(np.abs(s - s.T)))
    if asym > ITERATIVE:
        raise NotReversible(f"symmetrized kernel asymmetric by {asym:.3e}")
    return (s + s.T) / 2.0


def eigen_system(s_matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending, ties by original index) and matching
    orthonormal eigenvector columns, via cyclic Jacobi sweeps."""
    s = np.asarray(s_matrix, dtype=float)
    asym = float(np.max(np.abs(s - s.T))) if s.size else 0.0
    if asym > ITERATIVE:
        raise NotReversible(f"matrix asymmetric by {asym:.3e}")
    diag, q, sweeps, off = kernels.jacobi_eigh(s, JACOBI_OFFDIAG, JACOBI_MAX_SWEEPS)
    if off > JACOBI_OFFDIAG:
        raise NoConvergence(
            f"off-diagonal norm {off:.3e} after {sweeps} sweeps"
        )
    recon = float(np.max(np.abs(s - (q * diag) @ q.T)))
    if recon > _RECON_TOL:
        raise NumericalFailure(f"eigen reconstruction residual {recon:.3e}")
    order = np.argsort(-diag, kind="stable")
    return diag[order], q[:, order]


def eigen_decompose(s_matrix: np.ndarray) -> np.ndarray:
    """Descending eigenvalues of a symmetric matrix."""
    return eigen_system(s_matrix)[0]


def variance_under(chain: ReversibleChain, values: np.ndarray) -> float:
    """Variance of a state function under the stationary distribution."""
    pi = chain.stationary.probs
    f = np.asarray(values, dtype=float)
    mean = float(np.dot(pi, f))
    return float(np.dot(pi, (f - mean) ** 2))


def dirichlet_form(chain: ReversibleChain, values: np.ndarray) -> float:
    """(1/2) sum_f pi(f) sum_g T(g|f) (f(f) - f(g))^2."""
    pi = chain.stationary.probs
    f = np.asarray(values, dtype=float)
    diff = f[:, None] - f[None, :]
    return float(0.5 * np.sum(pi[:, None] * chain.kernel * diff * diff))


def spectral_report(chain: ReversibleChain, p0: Distribution) -> SpectralReport:
    """Full spectrum plus the scalar ingredients of the mixing bounds."""
    mu, _ = eigen_system(symmetrize(chain))
    if abs(mu[0] - 1.0) > ITERATIVE:
        raise InvariantViolation(f"leading eigenvalue {mu[0]} != 1")
    if np.max(np.abs(mu)) > 1.0 + ITERATIVE:
        raise InvariantViolation("eigenvalue magnitude exceeds 1")
    lambda2 = float(1.0 - mu[1]) if mu.size > 1 else 0.0
    rho = float(min(1.0, np.max(np.abs(mu[1:])))) if mu.size > 1 else 0.0
    mu_ro = mu.copy()
    mu_ro.flags.writeable = False
    return SpectralReport(
        eigenvalues_mu=mu_ro,
        lambda2=lambda2,
        rho=rho,
        variance_V=variance_under(chain, chain.potential),
        dirichlet_V=dirichlet_form(chain, chain.potential),
        chi0=chi_square_distance(p0, chain.stationary),
    )


def second_eigenfunction(chain: ReversibleChain) -> np.ndarray:
    """Eigenfunction of the transition operator for mu_2, unit norm in
    L2(pi).  This is the minimizer of the Rayleigh quotient over mean-zero
    functions, so it makes the variance bound tight."""
    _, q = eigen_system(symmetrize(chain))
    return q[:, 1] / np.sqrt(chain.stationary.probs)


def convergence_bound_check(chain: ReversibleChain, p0: Distribution,
                            t_max: int) -> np.ndarray:
    """Margins of the geometric envelope on the expected potential.

    For each t <= t_max, computes bound(t) - |L(t) - L_inf| where
    bound(t) = rho^t sqrt(Var_pi V) chi0.  All margins must clear -1e-9;
    a violation raises :class:`InvariantViolation`.
    """
    report = spectral_report(chain, p0)
    traj = evolve(chain, p0, t_max)
    l_inf = float(np.dot(chain.stationary.probs, chain.potential))
    deviation = np.abs(traj.expected_potential_trace - l_inf)
    ts = np.arange(t_max + 1, dtype=float)
    bound = report.rho ** ts * np.sqrt(report.variance_V) * report.chi0
    margins = bound - deviation
    worst = float(np.min(margins))
    if worst < -BOUND_SLACK:
        raise InvariantViolation(f"convergence envelope violated by {-worst:.3e}")
    return margins


def poincare_check(chain: ReversibleChain, potential: np.ndarray | None = None) -> float:
    """Margin of the variance-vs-Dirichlet inequality for a state function.

    Returns dirichlet/lambda2 - variance, asserted >= -1e-9.  Uses the
    chain's own potential unless another function is supplied (the second
    eigenfunction makes the margin vanish).
    """
    mu = eigen_decompose(symmetrize(chain))
    lambda2 = float(1.0 - mu[1]) if mu.size > 1 else 0.0
    if lambda2 <= DEGENERATE_GAP:
        raise DegenerateGap(f"spectral gap {lambda2:.3e} is numerically zero")
    f = chain.potential if potential is None else np.asarray(potential, dtype=float)
    dirichlet = dirichlet_form(chain, f)
    variance = variance_under(chain, f)
    # Assert in product form: dividing by a tiny gap would amplify
    # eigensolver roundoff into the margin.  The extra term is a roundoff
    # floor at the scale of the compared products.
    slack = BOUND_SLACK * lambda2 + 1e-12 * max(1.0, dirichlet, lambda2 * variance)
    if dirichlet - lambda2 * variance < -slack:
        margin = dirichlet / lambda2 - variance
        raise InvariantViolation(f"variance bound violated by {-margin:.3e}")
    return float(dirichlet / lambda2 - variance)
