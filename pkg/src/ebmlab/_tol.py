"""Centralized tolerance constants.

Structural identities (algebraic rearrangements of exact sums) are held to
STRUCTURAL; anything that passes through an iterative solver or an
eigendecomposition gets ITERATIVE.  Keeping them in one place gives the
property suites a single tuning point.
"""

# Exact algebraic identities evaluated in double precision.
STRUCTURAL = 1e-12

# Iterative / eigensolver results.
ITERATIVE = 1e-10

# One-sided bound checks (hitting times, convergence envelope, Poincare).
BOUND_SLACK = 1e-9

# Central finite-difference residuals.
FINITE_DIFF = 1e-6

# Cyclic Jacobi sweep controls.
JACOBI_OFFDIAG = 1e-12
JACOBI_MAX_SWEEPS = 100

# Gaussian elimination pivot threshold.
PIVOT_MIN = 1e-12

# Below this, a spectral gap is treated as degenerate.
DEGENERATE_GAP = 1e-12
