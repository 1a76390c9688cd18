"""Finite-state laboratory for reward-tilted policies and reversible chains.

Subpackages by concern:

- probcore:  exact finite-distribution arithmetic and divergences
- ebm:       reward tilting and the regularized-objective identities
- chain:     reversible kernels, potentials, master-equation dynamics,
             hitting times
- spectral:  symmetrization, Jacobi eigenvalues, mixing bounds
- rlvr:      binary-reward tilt paths, accuracy calculus, entropy traces
- kernels:   compiled/NumPy backends for the hot inner loops
- cli:       the `lab` command (config in, CSV + manifest out)
"""

from .probcore import (
    BernoulliRate,
    Distribution,
    bernoulli_kl,
    chi_square_distance,
    cross_entropy,
    entropy,
    kl_divergence,
)

__version__ = "0.1.0"

__all__ = [
    "BernoulliRate",
    "Distribution",
    "bernoulli_kl",
    "chi_square_distance",
    "cross_entropy",
    "entropy",
    "kl_divergence",
    "__version__",
]
