"""Exact discrete mutual-information and data-processing checks."""

import numpy as np
import pytest

from resflow.info import (JointDistribution, dpi_chain, entropy_bits,
                          flow_mi_invariance, mutual_info, push_bijection,
                          random_joint, random_stochastic)


def _mi_bruteforce(p):
    """Independent oracle: triple loop over the definition."""
    p = np.asarray(p, dtype=np.float64)
    pr = p.sum(axis=1)
    pc = p.sum(axis=0)
    total = 0.0
    for i in range(p.shape[0]):
        for j in range(p.shape[1]):
            if p[i, j] > 0:
                total += p[i, j] * np.log2(p[i, j] / (pr[i] * pc[j]))
    return total


class TestJointDistribution:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            JointDistribution(np.array([[0.5, 0.6], [-0.1, 0.0]]))

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            JointDistribution(np.array([[0.5, 0.4], [0.0, 0.0]]))

    def test_marginals(self):
        j = JointDistribution(np.array([[0.4, 0.1], [0.1, 0.4]]))
        assert np.allclose(j.marginal_rows(), [0.5, 0.5])
        assert np.allclose(j.marginal_cols(), [0.5, 0.5])


class TestMutualInfo:
    def test_independent_uniform_is_zero(self):
        j = JointDistribution(np.full((2, 2), 0.25))
        assert mutual_info(j) == pytest.approx(0.0, abs=1e-15)

    def test_perfectly_correlated_binary_is_one_bit(self):
        j = JointDistribution(np.diag([0.5, 0.5]))
        assert mutual_info(j) == pytest.approx(1.0, abs=1e-15)

    def test_hand_checked_value(self):
        # brute-force from the joint histogram definition
        j = JointDistribution(np.array([[0.4, 0.1], [0.1, 0.4]]))
        assert mutual_info(j) == pytest.approx(0.27807, abs=1e-5)
        assert mutual_info(j) == pytest.approx(_mi_bruteforce(j.p), abs=1e-13)

    def test_matches_bruteforce_on_random_joints(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            j = random_joint(rng.integers(2, 6), rng.integers(2, 6), rng)
            assert mutual_info(j) == pytest.approx(_mi_bruteforce(j.p), abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            j = random_joint(3, 5, rng)
            assert abs(mutual_info(j) - mutual_info(JointDistribution(j.p.T))) <= 1e-12

    def test_self_information_equals_entropy(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            p = rng.random(6)
            p /= p.sum()
            j = JointDistribution(np.diag(p))
            assert abs(mutual_info(j) - entropy_bits(p)) <= 1e-12

    def test_nonnegative(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            assert mutual_info(random_joint(4, 4, rng)) >= 0.0


class TestBijectionInvariance:
    def test_identity_is_noop(self):
        j = JointDistribution(np.array([[0.4, 0.1], [0.1, 0.4]]))
        q = push_bijection(j, [0, 1], [0, 1])
        assert np.array_equal(q.p, j.p)

    def test_row_swap_keeps_one_bit(self):
        j = JointDistribution(np.diag([0.5, 0.5]))
        q = push_bijection(j, [1, 0], [0, 1])
        assert mutual_info(q) == pytest.approx(1.0, abs=1e-15)

    def test_rejects_non_bijection(self):
        j = JointDistribution(np.full((2, 2), 0.25))
        with pytest.raises(ValueError, match="bijection"):
            push_bijection(j, [0, 0], [0, 1])

    def test_200_random_bijections_invariant(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(200):
            n, m = rng.integers(2, 7, size=2)
            j = random_joint(n, m, rng)
            q = push_bijection(j, rng.permutation(n), rng.permutation(m))
            worst = max(worst, abs(mutual_info(q) - mutual_info(j)))
        assert worst <= 1e-12


class TestDataProcessing:
    def test_identity_second_stage_is_lossless(self):
        rng = np.random.default_rng(12)
        px = np.array([0.3, 0.7])
        ch1 = random_stochastic(2, 3, rng)
        mi_xy, mi_xz = dpi_chain(px, ch1, np.eye(3))
        assert mi_xz == pytest.approx(mi_xy, abs=1e-12)

    def test_cascaded_noisy_channels_lose_information(self):
        bsc = np.array([[0.9, 0.1], [0.1, 0.9]])
        mi_xy, mi_xz = dpi_chain(np.array([0.5, 0.5]), bsc, bsc)
        assert mi_xz < mi_xy

    def test_constant_output_erases_everything(self):
        rng = np.random.default_rng(13)
        ch1 = random_stochastic(3, 3, rng)
        erase = np.tile([1.0, 0.0, 0.0], (3, 1))
        _, mi_xz = dpi_chain(np.full(3, 1 / 3), ch1, erase)
        assert mi_xz == pytest.approx(0.0, abs=1e-12)

    def test_rejects_non_stochastic_channel(self):
        with pytest.raises(ValueError, match="stochastic"):
            dpi_chain(np.array([0.5, 0.5]), np.array([[0.7, 0.7], [0.5, 0.5]]),
                      np.eye(2))

    def test_500_random_chains_no_violation(self):
        rng = np.random.default_rng(14)
        for _ in range(500):
            n, m, k = rng.integers(2, 6, size=3)
            px = rng.random(n)
            px /= px.sum()
            mi_xy, mi_xz = dpi_chain(px, random_stochastic(n, m, rng),
                                     random_stochastic(m, k, rng))
            assert mi_xz <= mi_xy + 1e-12


class TestFlowInvariance:
    def test_rotation_and_bijection_preserve_mi(self):
        for seed in range(10):
            rep = flow_mi_invariance(dim=2, seed=seed)
            assert rep.max_bijection_deviation <= 1e-12
            assert rep.mi_rotation == pytest.approx(rep.mi_reference, abs=1e-12)

    def test_collapse_strictly_reduces_mi(self):
        for seed in range(10):
            rep = flow_mi_invariance(dim=2, seed=seed)
            assert rep.mi_collapse < rep.mi_reference
            assert rep.collapse_strictly_lower
            assert rep.passed

    def test_three_dim_grid(self):
        rep = flow_mi_invariance(dim=3, seed=0, grid=3)
        assert rep.n_states == 27
        assert rep.passed

    def test_dim_limit_enforced(self):
        with pytest.raises(ValueError):
            flow_mi_invariance(dim=4)
