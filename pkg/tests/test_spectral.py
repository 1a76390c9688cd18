"""Symmetrization, Jacobi spectra, the convergence envelope, and the
variance-vs-Dirichlet inequality."""

import numpy as np
import pytest

from ebmlab import chain, scenarios, spectral
from ebmlab.errors import DegenerateGap, NoConvergence, NotReversible
from ebmlab.probcore import Distribution


def tilted(seed, index, n_states=16, beta=1.0):
    sc = scenarios.random_scenario(seed, index, n_states=n_states, beta=beta)
    return chain.tilt_kernel(chain.build_pretrained_kernel(sc), sc.h, sc.beta)


def two_state_chain(p, q):
    kernel = np.array([[1 - p, p], [q, 1 - q]])
    pi = np.array([q, p]) / (p + q)
    v = -np.log(pi)
    return chain.ReversibleChain(kernel=kernel, potential=v,
                                 stationary=Distribution.from_probs(pi))


def product_form_chain(pi):
    pi = np.asarray(pi, dtype=float)
    return chain.ReversibleChain(
        kernel=np.tile(pi, (pi.size, 1)),
        potential=-np.log(pi),
        stationary=Distribution.from_probs(pi),
    )


def power_iteration_top2(ch, iters=20_000):
    """Independent solver: squared-operator power iteration in L2(pi).

    Returns (leading eigenvalue, largest magnitude among the rest).  Working
    with P^2 removes sign oscillation, and deflating against the constant
    function isolates the second component.
    """
    pi = ch.stationary.probs
    t = ch.kernel
    rng = np.random.default_rng(0)

    def inner(f, g):
        return float(np.dot(pi, f * g))

    ones = np.ones(ch.n)
    top = inner(ones, t @ ones) / inner(ones, ones)

    v = rng.normal(size=ch.n)
    v -= inner(v, ones) * ones
    for _ in range(iters):
        v = t @ (t @ v)
        v -= inner(v, ones) * ones
        norm = np.sqrt(inner(v, v))
        if norm < 1e-280:
            return top, 0.0
        v /= norm
    rho_sq = inner(v, t @ (t @ v)) / inner(v, v)
    return top, float(np.sqrt(max(rho_sq, 0.0)))


class TestSymmetrize:
    def test_product_form_is_rank_one(self):
        pi = np.array([0.5, 0.3, 0.2])
        s = spectral.symmetrize(product_form_chain(pi))
        root = np.sqrt(pi)
        np.testing.assert_allclose(s, np.outer(root, root), atol=1e-14)

    def test_uniform_stationary_keeps_kernel(self):
        ch = two_state_chain(0.3, 0.3)
        np.testing.assert_allclose(spectral.symmetrize(ch), ch.kernel, atol=1e-14)

    def test_two_state_off_diagonal(self):
        p, q = 0.3, 0.6
        s = spectral.symmetrize(two_state_chain(p, q))
        np.testing.assert_allclose(s[0, 1], np.sqrt(p * q), atol=1e-14)
        np.testing.assert_allclose(s[1, 0], np.sqrt(p * q), atol=1e-14)


class TestEigenDecompose:
    def test_identity(self):
        np.testing.assert_allclose(spectral.eigen_decompose(np.eye(5)), 1.0)

    def test_two_state_analytic(self):
        for p, q in ((0.3, 0.6), (0.5, 0.5), (0.05, 0.9)):
            mu = spectral.eigen_decompose(spectral.symmetrize(two_state_chain(p, q)))
            np.testing.assert_allclose(mu, [1.0, 1.0 - p - q], atol=1e-10)

    def test_trace_identity(self):
        for i in range(10):
            ch = tilted(40, i, n_states=20)
            mu = spectral.eigen_decompose(spectral.symmetrize(ch))
            assert abs(mu.sum() - np.trace(ch.kernel)) <= 1e-8

    def test_rejects_asymmetric(self):
        with pytest.raises(NotReversible):
            spectral.eigen_decompose(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_sweep_exhaustion(self, monkeypatch):
        monkeypatch.setattr(spectral, "JACOBI_MAX_SWEEPS", 0)
        ch = tilted(41, 0, n_states=8)
        with pytest.raises(NoConvergence):
            spectral.eigen_decompose(spectral.symmetrize(ch))

    def test_permutation_leaves_spectrum(self):
        ch = tilted(42, 0, n_states=12)
        s = spectral.symmetrize(ch)
        rng = np.random.default_rng(7)
        perm = rng.permutation(12)
        mu = spectral.eigen_decompose(s)
        mu_p = spectral.eigen_decompose(s[np.ix_(perm, perm)])
        np.testing.assert_allclose(mu, mu_p, atol=1e-10)

    def test_agrees_with_power_iteration(self):
        for i in range(5):
            ch = tilted(43, i, n_states=10, beta=1.0)
            report = spectral.spectral_report(ch, ch.stationary)
            top, rho = power_iteration_top2(ch)
            assert abs(report.eigenvalues_mu[0] - top) <= 1e-6
            assert abs(report.rho - rho) <= 1e-6


class TestSpectralReport:
    def test_stationary_start_has_zero_distance(self):
        ch = tilted(44, 0, n_states=10)
        report = spectral.spectral_report(ch, ch.stationary)
        assert report.chi0 <= 1e-12

    def test_constant_potential_zeroes_both_forms(self):
        # uniform base on a regular graph with h = 0: flat potential
        adj = ~np.eye(5, dtype=bool)
        sc = chain.ChainScenario(5, Distribution.uniform(5), adj,
                                 np.zeros(5), 1.0, 0)
        ch = chain.tilt_kernel(chain.build_pretrained_kernel(sc), sc.h, sc.beta)
        report = spectral.spectral_report(ch, Distribution.point_mass(0, 5))
        assert report.variance_V <= 1e-12
        assert report.dirichlet_V <= 1e-12

    def test_balanced_two_state_mixes_in_one_step(self):
        report = spectral.spectral_report(two_state_chain(0.5, 0.5),
                                          Distribution.point_mass(0, 2))
        assert abs(report.rho) <= 1e-12
        np.testing.assert_allclose(report.lambda2, 1.0, atol=1e-12)

    def test_report_invariants(self):
        for i in range(10):
            ch = tilted(45, i, n_states=16, beta=0.5)
            report = spectral.spectral_report(ch, Distribution.point_mass(0, 16))
            assert abs(report.eigenvalues_mu[0] - 1.0) <= 1e-10
            assert np.max(np.abs(report.eigenvalues_mu)) <= 1.0 + 1e-10
            assert abs(report.lambda2 - (1.0 - report.eigenvalues_mu[1])) <= 1e-10
            assert 0.0 <= report.rho <= 1.0


class TestConvergenceBound:
    def test_stationary_start_trivial(self):
        ch = tilted(46, 0, n_states=8)
        margins = spectral.convergence_bound_check(ch, ch.stationary, 50)
        assert np.min(margins) >= -1e-9

    def test_product_form_hits_stationarity_in_one_step(self):
        pi = np.array([0.4, 0.35, 0.25])
        ch = product_form_chain(pi)
        p0 = Distribution.point_mass(2, 3)
        traj = chain.evolve(ch, p0, 5)
        l_inf = float(np.dot(pi, ch.potential))
        np.testing.assert_allclose(traj.expected_potential_trace[1:], l_inf,
                                   atol=1e-12)
        margins = spectral.convergence_bound_check(ch, p0, 5)
        assert np.min(margins) >= -1e-9

    def test_random_pairs_respect_envelope(self):
        rng = np.random.default_rng(47)
        for i in range(40):
            n = int(rng.integers(4, 24))
            ch = tilted(47, i, n_states=n, beta=float(rng.uniform(0.25, 4.0)))
            p0 = Distribution.from_probs(rng.dirichlet(np.ones(n)))
            margins = spectral.convergence_bound_check(ch, p0, 100)
            assert np.min(margins) >= -1e-9


class TestPoincare:
    def test_flat_function_margin_zero(self):
        ch = two_state_chain(0.3, 0.6)
        margin = spectral.poincare_check(ch, potential=np.zeros(2))
        np.testing.assert_allclose(margin, 0.0, atol=1e-12)

    def test_random_chains_nonnegative_margin(self):
        for i in range(15):
            ch = tilted(48, i, n_states=14, beta=0.5)
            assert spectral.poincare_check(ch) >= -1e-9

    def test_second_eigenfunction_is_tight(self):
        for i in range(10):
            ch = tilted(49, i, n_states=12)
            phi = spectral.second_eigenfunction(ch)
            margin = spectral.poincare_check(ch, potential=phi)
            assert abs(margin) <= 1e-6

    def test_degenerate_gap(self):
        ch = chain.ReversibleChain(kernel=np.eye(3), potential=np.zeros(3),
                                   stationary=Distribution.uniform(3))
        with pytest.raises(DegenerateGap):
            spectral.poincare_check(ch)
