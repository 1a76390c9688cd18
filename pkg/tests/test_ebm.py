"""Reward tilting: closed-form values, optimality, and the exact
suboptimality identity."""

import math

import numpy as np
import pytest

from ebmlab import ebm
from ebmlab.errors import NonPositiveBeta, SizeMismatch, SupportViolation
from ebmlab.probcore import Distribution, kl_divergence

LOG_Z_TWO_STATE = 0.6201145069582775  # log((1 + e)/2)


def random_instance(rng, n_max=64):
    n = int(rng.integers(2, n_max + 1))
    reference = Distribution.from_probs(rng.dirichlet(np.ones(n)))
    policy = Distribution.from_probs(rng.dirichlet(np.ones(n)))
    reward = rng.normal(scale=2.0, size=n)
    beta = float(rng.uniform(0.1, 10.0))
    return policy, reference, reward, beta


class TestLogPartition:
    def test_zero_reward(self):
        rng = np.random.default_rng(0)
        ref = Distribution.from_probs(rng.dirichlet(np.ones(7)))
        assert abs(ebm.log_partition(ref, np.zeros(7), 2.0)) < 1e-12

    def test_constant_reward_factors_out(self):
        rng = np.random.default_rng(1)
        ref = Distribution.from_probs(rng.dirichlet(np.ones(5)))
        for c, beta in ((3.0, 1.0), (-2.0, 0.5), (7.0, 4.0)):
            got = ebm.log_partition(ref, np.full(5, c), beta)
            assert abs(got - c / beta) < 1e-12

    def test_frozen_two_state(self):
        got = ebm.log_partition(Distribution.uniform(2), [0.0, 1.0], 1.0)
        np.testing.assert_allclose(got, LOG_Z_TWO_STATE, atol=1e-15)

    def test_rejects_bad_inputs(self):
        with pytest.raises(NonPositiveBeta):
            ebm.log_partition(Distribution.uniform(2), [0.0, 1.0], 0.0)
        with pytest.raises(SizeMismatch):
            ebm.log_partition(Distribution.uniform(2), [0.0, 1.0, 2.0], 1.0)


class TestTilt:
    def test_zero_reward_is_identity(self):
        rng = np.random.default_rng(2)
        ref = Distribution.from_probs(rng.dirichlet(np.ones(6)))
        tilted = ebm.tilt(ref, np.zeros(6), 1.0).tilted
        np.testing.assert_allclose(tilted.probs, ref.probs, atol=1e-14)

    def test_frozen_two_state(self):
        t = ebm.tilt(Distribution.uniform(2), [0.0, 1.0], 1.0)
        np.testing.assert_allclose(
            t.tilted.probs, [1 / (1 + math.e), math.e / (1 + math.e)], atol=1e-15
        )
        np.testing.assert_allclose(t.log_partition, LOG_Z_TWO_STATE, atol=1e-15)

    def test_huge_beta_approaches_reference(self):
        rng = np.random.default_rng(3)
        ref = Distribution.from_probs(rng.dirichlet(np.ones(5)))
        tilted = ebm.tilt(ref, rng.normal(size=5), 1e9).tilted
        np.testing.assert_allclose(tilted.probs, ref.probs, atol=1e-8)

    def test_monotone_in_reward(self):
        ref = Distribution.uniform(3)
        t = ebm.tilt(ref, [0.0, 1.0, 2.0], 1.5).tilted
        assert t.probs[0] < t.probs[1] < t.probs[2]

    def test_preserves_zero_support(self):
        ref = Distribution.from_probs([0.5, 0.0, 0.5])
        t = ebm.tilt(ref, [1.0, 100.0, 0.0], 1.0).tilted
        assert t.probs[1] == 0.0

    def test_partition_consistent_with_tilted_mass(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            _, ref, reward, beta = random_instance(rng, n_max=16)
            t = ebm.tilt(ref, reward, beta)
            direct = np.log(np.dot(ref.probs, np.exp(reward / beta)))
            assert abs(t.log_partition - direct) < 1e-12

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        _, ref, reward, beta = random_instance(rng, n_max=12)
        perm = rng.permutation(ref.n)
        direct = ebm.tilt(ref.permuted(perm), reward[perm], beta).tilted
        via = ebm.tilt(ref, reward, beta).tilted.permuted(perm)
        np.testing.assert_allclose(direct.probs, via.probs, atol=1e-14)


class TestObjective:
    def test_policy_equals_reference(self):
        rng = np.random.default_rng(6)
        ref = Distribution.from_probs(rng.dirichlet(np.ones(4)))
        reward = rng.normal(size=4)
        got = ebm.objective(ref, ref, reward, 2.0)
        np.testing.assert_allclose(got, np.dot(ref.probs, reward), atol=1e-13)

    def test_zero_reward_is_negative_kl(self):
        rng = np.random.default_rng(7)
        ref = Distribution.from_probs(rng.dirichlet(np.ones(4)))
        pol = Distribution.from_probs(rng.dirichlet(np.ones(4)))
        got = ebm.objective(pol, ref, np.zeros(4), 1.7)
        np.testing.assert_allclose(got, -1.7 * kl_divergence(pol, ref), atol=1e-13)

    def test_support_violation(self):
        ref = Distribution.from_probs([1.0, 0.0])
        with pytest.raises(SupportViolation):
            ebm.objective(Distribution.uniform(2), ref, [0.0, 0.0], 1.0)

    def test_optimum_value_is_beta_log_partition(self):
        t = ebm.tilt(Distribution.uniform(2), [0.0, 1.0], 1.0)
        got = ebm.objective(t.tilted, Distribution.uniform(2), [0.0, 1.0], 1.0)
        np.testing.assert_allclose(got, LOG_Z_TWO_STATE, atol=1e-14)

    def test_optimum_by_brute_force_grid(self):
        """Independent check on two states: scan all policies (p, 1-p)."""
        ref = Distribution.uniform(2)
        reward = np.array([0.0, 1.0])
        beta = 1.0
        best = ebm.objective(ebm.tilt(ref, reward, beta).tilted, ref, reward, beta)
        grid_best = -np.inf
        grid_arg = None
        for p in np.linspace(1e-9, 1 - 1e-9, 20001):
            j = ebm.objective(Distribution.from_probs([p, 1 - p]), ref, reward, beta)
            if j > grid_best:
                grid_best, grid_arg = j, p
        assert grid_best <= best + 1e-12
        assert abs(grid_best - best) < 1e-8
        assert abs(grid_arg - 1 / (1 + math.e)) < 1e-4

    def test_tilt_maximizes_over_random_policies(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            policy, ref, reward, beta = random_instance(rng, n_max=16)
            best = ebm.objective(ebm.tilt(ref, reward, beta).tilted, ref, reward, beta)
            assert ebm.objective(policy, ref, reward, beta) <= best + 1e-12


class TestSuboptimalityIdentity:
    def test_at_optimum(self):
        ref = Distribution.uniform(3)
        reward = np.array([0.0, 1.0, -1.0])
        t = ebm.tilt(ref, reward, 2.0)
        assert ebm.suboptimality_identity_residual(t.tilted, ref, reward, 2.0) < 1e-14

    def test_zero_reward_any_policy(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            pol = Distribution.from_probs(rng.dirichlet(np.ones(5)))
            ref = Distribution.from_probs(rng.dirichlet(np.ones(5)))
            assert ebm.suboptimality_identity_residual(
                pol, ref, np.zeros(5), 0.7) < 1e-12

    def test_random_instances(self):
        rng = np.random.default_rng(10)
        worst = 0.0
        for _ in range(1000):
            policy, ref, reward, beta = random_instance(rng)
            worst = max(
                worst,
                ebm.suboptimality_identity_residual(policy, ref, reward, beta),
            )
        assert worst <= 1e-10
