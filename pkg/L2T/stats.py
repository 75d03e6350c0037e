#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# (C)2025 L2T-Reflect contributors

"""
Per-kernel two-sample statistics of an embedded domain pair.

For every kernel of a bank this module computes the biased MMD estimate,
the covariance of the MMD h-statistics and the unlabeled discriminant
criterion, and assembles them into the features of one experience.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

import L2T.utils as utils
import L2T.kernels as kernels
import L2T.factors as factors
import L2T.miscellaneous as miscellaneous

_ = miscellaneous.i18n

#: Guard for trace-ratio and reciprocal denominators
EPSILON = 1e-12

DEFAULT_NEIGHBORS = 5


@dataclass(eq=False)
class ExperienceFeatures:
    """
    Statistics of one experience entering the reflection function

    mmd, variance and discriminant are indexed by kernel; ratio and n_labeled
    are kept so the labeled-count correction can be refit during training.
    """

    mmd: np.ndarray
    variance: np.ndarray
    discriminant: np.ndarray
    inverse_ratio_target: float
    bank: kernels.KernelBank
    ratio: float = 1.0
    n_labeled: int = 0

    def __post_init__(self):
        self.mmd = utils.check_finite("mmd", self.mmd).reshape(-1)
        self.discriminant = utils.check_finite("discriminant", self.discriminant).reshape(-1)
        count = self.bank.count
        self.variance = utils.as_matrix("variance", self.variance, rows=count, cols=count)
        if self.mmd.size != count or self.discriminant.size != count:
            raise ValueError(_("Feature vectors must have {0} entries, got mmd {1} and discriminant {2}").format(
                count, self.mmd.size, self.discriminant.size))
        if not self.inverse_ratio_target > 0:
            raise ValueError(_("Inverse ratio target must be positive, got {0}").format(self.inverse_ratio_target))
        self.inverse_ratio_target = float(self.inverse_ratio_target)

    @property
    def kernel_count(self):
        return self.bank.count


@dataclass(eq=False)
class ScatterPair:
    """Local and non-local scatter matrices of the target for one kernel"""

    local: np.ndarray
    non_local: np.ndarray


def _embedded_pair(Zs, Zt):
    Zs = utils.as_matrix("Zs", Zs)
    Zt = utils.as_matrix("Zt", Zt, cols=Zs.shape[1])
    if Zs.shape[0] < 1 or Zt.shape[0] < 1:
        raise ValueError(_("Two-sample statistics need non-empty domains, got {0} and {1} rows").format(
            Zs.shape[0], Zt.shape[0]))
    return Zs, Zt


def paired_indices(n_s, n_t, seed):
    """
    Index pairing used by the variance estimator

    The larger domain is subsampled without replacement (seeded, kept in row
    order) down to n = min(n_s, n_t); the smaller domain keeps every row.

    Returns:
        tuple: (source indices, target indices), each of length n
    """
    n = min(n_s, n_t)
    rng = np.random.default_rng(seed)
    if n_s > n:
        idx_s = np.sort(rng.choice(n_s, size=n, replace=False))
    else:
        idx_s = np.arange(n_s)
    if n_t > n:
        idx_t = np.sort(rng.choice(n_t, size=n, replace=False))
    else:
        idx_t = np.arange(n_t)
    return idx_s, idx_t


def mmd_vector(Zs, Zt, bank):
    """
    Biased MMD estimate for every kernel of the bank (diagonal terms included)

    :param Zs: n_s x u embedded source rows
    :param Zt: n_t x u embedded target rows
    :param bank: KernelBank
    :return: vector of length bank.count
    """
    Zs, Zt = _embedded_pair(Zs, Zt)
    k_ss = kernels.rbf_grams(kernels.pairwise_sq_dists(Zs, Zs), bank)
    k_tt = kernels.rbf_grams(kernels.pairwise_sq_dists(Zt, Zt), bank)
    k_st = kernels.rbf_grams(kernels.pairwise_sq_dists(Zs, Zt), bank)
    return k_ss.mean(axis=(1, 2)) + k_tt.mean(axis=(1, 2)) - 2.0 * k_st.mean(axis=(1, 2))


def h_statistics(S, T, bank):
    """h_k(i, i') = K_k(s_i, s_i') + K_k(t_i, t_i') - 2 K_k(s_i, t_i') on paired rows"""
    k_ss = kernels.rbf_grams(kernels.pairwise_sq_dists(S, S), bank)
    k_tt = kernels.rbf_grams(kernels.pairwise_sq_dists(T, T), bank)
    k_st = kernels.rbf_grams(kernels.pairwise_sq_dists(S, T), bank)
    return k_ss + k_tt - 2.0 * k_st


def variance_matrix(Zs, Zt, bank, seed=0):
    """
    Covariance of the h-statistics between every pair of kernels

    Args:
        Zs (numpy.ndarray): Embedded source rows
        Zt (numpy.ndarray): Embedded target rows
        bank (KernelBank): Kernel bank
        seed (int): Seed of the row pairing

    Returns:
        numpy.ndarray: Symmetric PSD N_k x N_k matrix, zero when n = 1
    """
    Zs, Zt = _embedded_pair(Zs, Zt)
    idx_s, idx_t = paired_indices(Zs.shape[0], Zt.shape[0], seed)
    n = idx_s.size
    if n < 2:
        return np.zeros((bank.count, bank.count))
    h = h_statistics(Zs[idx_s], Zt[idx_t], bank).reshape(bank.count, n * n)
    h = h - h.mean(axis=1, keepdims=True)
    Q = (h @ h.T) / (n * n - 1.0)
    return 0.5 * (Q + Q.T)


def mutual_neighbors(Xt, r):
    """
    Boolean mask of mutual r-nearest-neighbor pairs among the target rows.

    Ties in distance go to the lower row index; a row is never its own neighbor.
    """
    Xt = utils.as_matrix("Xt", Xt)
    n = Xt.shape[0]
    if n < 2:
        raise ValueError(_("Neighborhoods need at least two target rows, got {0}").format(n))
    if r < 1 or r >= n:
        raise ValueError(_("Neighbor count r must lie in [1, {0}], got {1}").format(n - 1, r))
    distances = kernels.pairwise_sq_dists(Xt, Xt)
    np.fill_diagonal(distances, np.inf)
    nearest = np.argsort(distances, axis=1, kind="stable")[:, :r]
    neighbors = np.zeros((n, n), dtype=bool)
    neighbors[np.repeat(np.arange(n), r), nearest.reshape(-1)] = True
    return neighbors & neighbors.T


def _weighted_scatter(X, weights):
    # sum_jj' A_jj' (x_j - x_j')(x_j - x_j')^T = 2 X^T (diag(A 1) - A) X for symmetric A
    laplacian = np.diag(weights.sum(axis=1)) - weights
    S = 2.0 * (X.T @ laplacian @ X)
    return 0.5 * (S + S.T)


def scatter_matrices(Xt, bank, r=DEFAULT_NEIGHBORS):
    """
    Local and non-local scatter of the raw target rows for every kernel

    Neighborhoods are computed once from raw Euclidean distances and shared
    by all kernels.

    :param Xt: n_t x m raw target rows
    :param bank: KernelBank
    :param r: Neighbor count
    :return: list of ScatterPair, one per kernel
    """
    Xt = utils.as_matrix("Xt", Xt)
    mutual = mutual_neighbors(Xt, r)
    n = Xt.shape[0]
    grams = kernels.rbf_grams(kernels.pairwise_sq_dists(Xt, Xt), bank)
    pairs = []
    for gram in grams:
        local = np.where(mutual, gram, 0.0)
        non_local = gram - local
        np.fill_diagonal(non_local, 0.0)
        pairs.append(ScatterPair(local=_weighted_scatter(Xt, local) / (n * n),
                                 non_local=_weighted_scatter(Xt, non_local) / (n * n)))
    return pairs


def stack_scatter(scatter):
    """Scatter pairs as two N_k x m x m arrays"""
    return (np.stack([pair.local for pair in scatter]),
            np.stack([pair.non_local for pair in scatter]))


def trace_form(S, W):
    """tr(W^T S W) for a single m x m matrix or a stack of them"""
    return np.sum(W * (S @ W), axis=(-2, -1))


def discriminant_vector(scatter, W):
    """
    Trace ratio tr(W^T S^N W) / (tr(W^T S^L W) + eps) for every kernel
    """
    W = factors.as_factor(W).entries
    local, non_local = stack_scatter(scatter)
    if local.shape[1] != W.shape[0]:
        raise ValueError(_("W must have {0} rows, got shape {1}").format(local.shape[1], W.shape))
    return trace_form(non_local, W) / (trace_form(local, W) + EPSILON)


def featurize(source, target, W, ratio, r=DEFAULT_NEIGHBORS, seed=0, n_labeled=0,
              exponents=kernels.DEFAULT_EXPONENTS):
    """
    Assemble the features of one experience

    Args:
        source (Domain): Source domain
        target (Domain): Target domain
        W (FactorMatrix): Factor matrix of the experience
        ratio (float): Improvement ratio l of the experience
        r (int): Neighbor count of the discriminant criterion
        seed (int): Seed of the variance row pairing
        n_labeled (int): Labeled target rows behind the ratio
        exponents (tuple): Global bandwidth exponent grid

    Returns:
        ExperienceFeatures: Features with inverse ratio target 1 / ratio
    """
    W = factors.as_factor(W).entries
    if not ratio > 0:
        raise ValueError(_("Improvement ratio must be positive, got {0}").format(ratio))
    Xs = utils.as_matrix("source features", source.features, cols=W.shape[0])
    Xt = utils.as_matrix("target features", target.features, cols=W.shape[0])

    Zs, Zt = Xs @ W, Xt @ W
    bank = kernels.KernelBank(kernels.mean_energy(Zs, Zt), tuple(exponents))
    return ExperienceFeatures(
        mmd=mmd_vector(Zs, Zt, bank),
        variance=variance_matrix(Zs, Zt, bank, seed),
        discriminant=discriminant_vector(scatter_matrices(Xt, bank, r), W),
        inverse_ratio_target=1.0 / ratio,
        bank=bank,
        ratio=float(ratio),
        n_labeled=int(n_labeled),
    )
