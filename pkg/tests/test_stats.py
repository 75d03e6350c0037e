#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# (C)2025 L2T-Reflect contributors

"""
Tests for the per-kernel two-sample statistics.
"""

import os
import sys
import unittest

import numpy as np

# Add parent directory to path for importing L2T modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import L2T.kernels as kernels
import L2T.stats as stats
import L2T.factors as factors
import L2T.pipeline as pipeline
from tests.test_base import L2TTestCase


def kernel_vector(a, b, bandwidths):
    return np.exp(-float(np.sum((a - b) ** 2)) / bandwidths)


def naive_mmd(Zs, Zt, bank):
    bandwidths = bank.bandwidths
    ss = sum(kernel_vector(a, b, bandwidths) for a in Zs for b in Zs)
    tt = sum(kernel_vector(a, b, bandwidths) for a in Zt for b in Zt)
    st = sum(kernel_vector(a, b, bandwidths) for a in Zs for b in Zt)
    ns, nt = len(Zs), len(Zt)
    return ss / ns ** 2 + tt / nt ** 2 - 2.0 * st / (ns * nt)


def naive_variance(S, T, bank):
    n = len(S)
    bandwidths = bank.bandwidths
    h = {}
    for i in range(n):
        for j in range(n):
            h[i, j] = (kernel_vector(S[i], S[j], bandwidths) + kernel_vector(T[i], T[j], bandwidths)
                       - 2.0 * kernel_vector(S[i], T[j], bandwidths))
    mean = sum(h.values()) / n ** 2
    Q = np.zeros((bank.count, bank.count))
    for value in h.values():
        Q += np.outer(value - mean, value - mean)
    return Q / (n ** 2 - 1)


def naive_scatter(X, bank, r):
    n = len(X)
    neighbors = []
    for j in range(n):
        order = sorted((float(np.sum((X[j] - X[i]) ** 2)), i) for i in range(n) if i != j)
        neighbors.append({i for _, i in order[:r]})
    pairs = []
    for delta in bank.bandwidths:
        local = np.zeros((X.shape[1], X.shape[1]))
        non_local = np.zeros_like(local)
        for j in range(n):
            for i in range(n):
                if i == j:
                    continue
                diff = np.outer(X[j] - X[i], X[j] - X[i])
                k = np.exp(-float(np.sum((X[j] - X[i]) ** 2)) / delta)
                mutual = i in neighbors[j] and j in neighbors[i]
                h = k if mutual else 0.0
                local += h / n ** 2 * diff
                non_local += (k - h) / n ** 2 * diff
        pairs.append((local, non_local))
    return pairs


class MmdVectorTests(L2TTestCase):
    """Test cases for mmd_vector"""

    def test_identical_samples(self):
        Z = self.random_matrix(9, 3)
        self.assertTrue(np.all(stats.mmd_vector(Z, Z.copy(), kernels.make_bank(1.0)) == 0.0))

    def test_singletons(self):
        s, t = np.array([[0.5, 1.0]]), np.array([[-0.5, 2.0]])
        bank = kernels.make_bank(0.8)
        expected = 2.0 - 2.0 * np.exp(-2.0 / bank.bandwidths)
        self.assertAllClose(stats.mmd_vector(s, t, bank), expected, atol=1e-15)

    def test_matches_double_loop(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            u = int(rng.integers(1, 9))
            Zs = rng.standard_normal((int(rng.integers(1, 41)), u))
            Zt = rng.standard_normal((int(rng.integers(1, 41)), u)) + 0.3
            bank = kernels.make_bank(kernels.mean_energy(Zs, Zt))
            self.assertAllClose(stats.mmd_vector(Zs, Zt, bank), naive_mmd(Zs, Zt, bank), atol=1e-10)

    def test_nonnegative(self):
        Zs, Zt = self.random_matrix(12, 3), self.random_matrix(15, 3, scale=2.0)
        self.assertGreaterEqual(stats.mmd_vector(Zs, Zt, kernels.make_bank(2.0)).min(), -1e-10)

    def test_rotation_invariance(self):
        Zs, Zt = self.random_matrix(10, 4), self.random_matrix(11, 4) + 1.0
        R = self.random_orthogonal(4)
        bank = kernels.make_bank(3.0)
        self.assertAllClose(stats.mmd_vector(Zs @ R, Zt @ R, bank), stats.mmd_vector(Zs, Zt, bank), atol=1e-12)

    def test_row_permutation_invariance(self):
        Zs, Zt = self.random_matrix(10, 2), self.random_matrix(7, 2)
        bank = kernels.make_bank(1.0)
        permuted = stats.mmd_vector(Zs[self.rng.permutation(10)], Zt[self.rng.permutation(7)], bank)
        self.assertAllClose(permuted, stats.mmd_vector(Zs, Zt, bank), atol=1e-12)

    def test_empty_domain(self):
        with self.assertRaises(ValueError):
            stats.mmd_vector(np.zeros((0, 2)), np.zeros((3, 2)), kernels.make_bank(1.0))


class VarianceMatrixTests(L2TTestCase):
    """Test cases for variance_matrix and the row pairing"""

    def test_constant_kernel(self):
        bank = kernels.KernelBank(1e12, (0.0, 1.0))
        Q = stats.variance_matrix(self.random_matrix(6, 2), self.random_matrix(6, 2), bank)
        self.assertLess(np.abs(Q).max(), 1e-8)

    def test_single_pair_is_zero(self):
        Q = stats.variance_matrix([[1.0, 2.0]], [[0.0, 0.0], [3.0, 1.0]], kernels.make_bank(1.0))
        self.assertEqual(Q.shape, (33, 33))
        self.assertTrue(np.all(Q == 0.0))

    def test_matches_covariance_loop(self):
        rng = np.random.default_rng(2)
        for trial in range(20):
            n = int(rng.integers(2, 13))
            Zs = rng.standard_normal((n, 3))
            Zt = rng.standard_normal((n, 3)) + 0.5
            bank = kernels.make_bank(kernels.mean_energy(Zs, Zt))
            Q = stats.variance_matrix(Zs, Zt, bank, seed=trial)
            self.assertAllClose(Q, naive_variance(Zs, Zt, bank), atol=1e-12)
            self.assertTrue(np.array_equal(Q, Q.T))
            self.assertGreaterEqual(np.linalg.eigvalsh(Q).min(), -1e-10)

    def test_unequal_sizes_use_recorded_pairing(self):
        Zs, Zt = self.random_matrix(12, 2), self.random_matrix(7, 2)
        bank = kernels.make_bank(1.0, low=-2, high=2)
        idx_s, idx_t = stats.paired_indices(12, 7, seed=5)
        self.assertEqual(idx_s.size, 7)
        self.assertTrue(np.array_equal(idx_t, np.arange(7)))
        self.assertEqual(len(set(idx_s.tolist())), 7)
        self.assertAllClose(stats.variance_matrix(Zs, Zt, bank, seed=5),
                            naive_variance(Zs[idx_s], Zt[idx_t], bank), atol=1e-12)

    def test_pairing_is_seeded(self):
        first = stats.paired_indices(20, 8, seed=11)
        second = stats.paired_indices(20, 8, seed=11)
        self.assertTrue(np.array_equal(first[0], second[0]))

    def test_column_mismatch(self):
        with self.assertRaises(ValueError):
            stats.variance_matrix(np.zeros((3, 2)), np.zeros((3, 3)), kernels.make_bank(1.0))


class ScatterTests(L2TTestCase):
    """Test cases for scatter_matrices and mutual neighbors"""

    def test_two_rows_have_no_nonlocal_scatter(self):
        X = np.array([[0.0, 1.0], [2.0, -1.0]])
        scatter = stats.scatter_matrices(X, kernels.make_bank(1.0), r=1)
        for pair in scatter:
            self.assertTrue(np.all(pair.non_local == 0.0))
        self.assertGreater(np.trace(scatter[-1].local), 0.0)

    def test_duplicate_rows_contribute_nothing(self):
        X = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]])
        for pair in stats.scatter_matrices(X, kernels.make_bank(1.0), r=1):
            self.assertTrue(np.all(pair.local == 0.0))
            self.assertTrue(np.all(pair.non_local == 0.0))

    def test_matches_brute_force(self):
        X = self.random_matrix(15, 6)
        bank = kernels.make_bank(kernels.mean_energy(X, X))
        for pair, (local, non_local) in zip(stats.scatter_matrices(X, bank, r=3), naive_scatter(X, bank, 3)):
            self.assertAllClose(pair.local, local, atol=1e-12)
            self.assertAllClose(pair.non_local, non_local, atol=1e-12)
            self.assertGreaterEqual(np.linalg.eigvalsh(pair.local).min(), -1e-10)
            self.assertGreaterEqual(np.linalg.eigvalsh(pair.non_local).min(), -1e-10)

    def test_ties_go_to_lower_index(self):
        # rows 1 and 2 are equally close to row 0
        X = np.array([[0.0], [1.0], [-1.0], [5.0]])
        mutual = stats.mutual_neighbors(X, 1)
        self.assertTrue(mutual[0, 1])
        self.assertFalse(mutual[0, 2])
        self.assertFalse(np.any(np.diag(mutual)))

    def test_neighbor_count_bounds(self):
        with self.assertRaises(ValueError):
            stats.scatter_matrices(self.random_matrix(4, 2), kernels.make_bank(1.0), r=4)


class DiscriminantTests(L2TTestCase):
    """Test cases for discriminant_vector"""

    def setUp(self):
        super().setUp()
        self.X = self.random_matrix(12, 5)
        self.bank = kernels.make_bank(kernels.mean_energy(self.X, self.X), low=-2, high=2)
        self.scatter = stats.scatter_matrices(self.X, self.bank, r=3)
        self.W = self.random_matrix(5, 2)

    def test_scale_invariance(self):
        tau = stats.discriminant_vector(self.scatter, self.W)
        self.assertAllClose(stats.discriminant_vector(self.scatter, -3.5 * self.W), tau, rtol=1e-10, atol=0)

    def test_rotation_invariance(self):
        tau = stats.discriminant_vector(self.scatter, self.W)
        rotated = stats.discriminant_vector(self.scatter, self.W @ self.random_orthogonal(2))
        self.assertAllClose(rotated, tau, rtol=1e-10, atol=0)

    def test_zero_nonlocal(self):
        X = np.array([[0.0, 1.0], [2.0, -1.0]])
        scatter = stats.scatter_matrices(X, kernels.make_bank(1.0), r=1)
        self.assertTrue(np.all(stats.discriminant_vector(scatter, np.eye(2)[:, :1]) == 0.0))

    def test_matches_trace_oracle(self):
        tau = stats.discriminant_vector(self.scatter, self.W)
        for k, pair in enumerate(self.scatter):
            expected = np.trace(self.W.T @ pair.non_local @ self.W) / (
                np.trace(self.W.T @ pair.local @ self.W) + stats.EPSILON)
            self.assertAlmostEqual(tau[k], expected, delta=1e-12 * max(1.0, abs(expected)))

    def test_row_mismatch(self):
        with self.assertRaises(ValueError):
            stats.discriminant_vector(self.scatter, np.ones((4, 2)))


class FeaturizeTests(L2TTestCase):
    """Test cases for featurize"""

    def test_identical_domains(self):
        domain = self.random_domain(10, 4)
        W = factors.random_proj(4, 2, seed=1)
        feats = stats.featurize(domain, domain, W, ratio=1.0, r=3)
        self.assertTrue(np.all(feats.mmd == 0.0))
        self.assertTrue(np.all(feats.variance == 0.0))
        self.assertEqual(feats.inverse_ratio_target, 1.0)

    def test_inverse_ratio(self):
        source, target = self.random_domain(8, 3), self.random_domain(9, 3, shift=1.0)
        feats = stats.featurize(source, target, np.eye(3), ratio=1.25, r=2, n_labeled=3)
        self.assertAlmostEqual(feats.inverse_ratio_target, 0.8)
        self.assertEqual(feats.n_labeled, 3)

    def test_reproduces_component_oracles(self):
        source, target = pipeline.gen_pair(self.small_synth())
        W = factors.joint_pca(source.features, target.features, 3).entries
        feats = stats.featurize(source, target, W, ratio=1.1, r=4, seed=9)
        Zs, Zt = source.features @ W, target.features @ W
        bank = kernels.make_bank(kernels.mean_energy(Zs, Zt))
        self.assertEqual(feats.bank, bank)
        self.assertAllClose(feats.mmd, naive_mmd(Zs, Zt, bank), atol=1e-10)
        self.assertAllClose(feats.variance, naive_variance(Zs, Zt, bank), atol=1e-12)
        scatter = naive_scatter(target.features, bank, 4)
        expected_tau = [np.trace(W.T @ nl @ W) / (np.trace(W.T @ l @ W) + stats.EPSILON) for l, nl in scatter]
        self.assertAllClose(feats.discriminant, expected_tau, rtol=1e-9, atol=1e-12)

    def test_custom_exponents(self):
        source, target = self.random_domain(8, 3), self.random_domain(8, 3, shift=0.5)
        feats = stats.featurize(source, target, np.eye(3), 1.0, r=2, exponents=kernels.exponent_grid(-12, 12))
        self.assertEqual(feats.kernel_count, 49)

    def test_nonpositive_ratio(self):
        domain = self.random_domain(6, 2)
        with self.assertRaises(ValueError):
            stats.featurize(domain, domain, np.eye(2), ratio=0.0, r=2)


if __name__ == '__main__':
    unittest.main()
