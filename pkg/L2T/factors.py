#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# (C)2025 L2T-Reflect contributors

"""
Latent factor matrices W, the uniform parameterization of what to transfer.

This module provides the pseudo-inverse recovery of W from a target
embedding and the base extractors used to generate transfer experiences.
Every extractor is exposed through a common handler interface so that
experience generation can pick them by their serialized token.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

import L2T.utils as utils
import L2T.kernels as kernels
import L2T.miscellaneous as miscellaneous

_ = miscellaneous.i18n

#: Eigenvalues at or below this fraction of the largest one are treated as null
RANK_TOLERANCE = 1e-10

DEFAULT_RIDGE = 1e-3


@dataclass(eq=False)
class FactorMatrix:
    """m x u latent factor matrix W"""

    entries: np.ndarray

    def __post_init__(self):
        self.entries = utils.as_matrix("W", self.entries)
        if self.u > self.m:
            raise ValueError(_("Latent dimension u={0} exceeds feature dimension m={1}").format(self.u, self.m))

    @property
    def m(self):
        return self.entries.shape[0]

    @property
    def u(self):
        return self.entries.shape[1]


class ExtractorId(str, Enum):
    """Closed set of base extractors, serialized as their lowercase token"""

    JOINT_PCA = "joint_pca"
    TARGET_PCA = "target_pca"
    TCA_LITE = "tca_lite"
    RANDOM_PROJ = "random_proj"
    KPCA_RECOVER = "kpca_recover"

    def __str__(self):
        return self.value


def as_factor(W):
    """Accept a FactorMatrix or a raw m x u array"""
    if isinstance(W, FactorMatrix):
        return W
    return FactorMatrix(W)


def _fix_signs(V):
    # Largest-magnitude entry of each column positive
    if V.shape[1] == 0:
        return V
    pivots = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[pivots, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _check_latent_dim(u, m):
    if u < 1 or u > m:
        raise ValueError(_("Latent dimension u must lie in [1, {0}], got {1}").format(m, u))


def recover_w(Xt, Zt):
    """
    Recover W from target rows and their latent embedding

    G = M M^T with M = pinv(Xt) Zt is factored by a symmetric eigendecomposition,
    W = V sqrt(lambda) over the numerically non-null eigenvalues. Then
    Xt W W^T Xt^T = Zt Zt^T holds whenever the columns of Zt lie in the
    column space of Xt; otherwise it holds for the projection of Zt onto it.

    Args:
        Xt (numpy.ndarray): n_t x m target rows
        Zt (numpy.ndarray): n_t x u embedded target rows

    Returns:
        FactorMatrix: m x u_eff factor matrix, u_eff <= u
    """
    Xt = utils.as_matrix("Xt", Xt)
    Zt = utils.as_matrix("Zt", Zt, rows=Xt.shape[0])
    if Xt.shape[0] < 1:
        raise ValueError(_("Recovery needs at least one target row"))

    M = scipy.linalg.pinv(Xt) @ Zt
    G = M @ M.T
    G = 0.5 * (G + G.T)
    eigenvalues, eigenvectors = scipy.linalg.eigh(G)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    order = np.argsort(eigenvalues, kind="stable")[::-1]
    eigenvalues, eigenvectors = eigenvalues[order], eigenvectors[:, order]

    largest = eigenvalues[0] if eigenvalues.size else 0.0
    if largest <= 0.0:
        return FactorMatrix(np.zeros((Xt.shape[1], 0)))
    keep = eigenvalues > RANK_TOLERANCE * largest
    W = eigenvectors[:, keep] * np.sqrt(eigenvalues[keep])
    return FactorMatrix(_fix_signs(W))


def _principal_directions(X, u):
    if X.shape[0] < 2:
        raise ValueError(_("Principal directions need at least two rows, got {0}").format(X.shape[0]))
    _check_latent_dim(u, X.shape[1])
    centered = X - X.mean(axis=0)
    full = u > min(centered.shape)
    Vt = scipy.linalg.svd(centered, full_matrices=full)[2]
    return _fix_signs(Vt[:u].T.copy())


def joint_pca(Xs, Xt, u):
    """Top-u principal directions of the stacked, jointly centered domains"""
    Xs = utils.as_matrix("Xs", Xs)
    Xt = utils.as_matrix("Xt", Xt, cols=Xs.shape[1])
    return FactorMatrix(_principal_directions(np.vstack([Xs, Xt]), u))


def target_pca(Xt, u):
    """Top-u principal directions of the target domain alone"""
    return FactorMatrix(_principal_directions(utils.as_matrix("Xt", Xt), u))


def tca_lite(Xs, Xt, u, ridge=DEFAULT_RIDGE):
    """
    Linear transfer component analysis

    Maximizes embedded variance against the embedded mean discrepancy: the
    top-u generalized eigenvectors of (X^T C X, X^T L X + ridge I), where L is
    the MMD coefficient matrix and C the centering matrix of X = [Xs; Xt].
    L is rank one, so X^T L X = d d^T with d the difference of domain means.
    """
    Xs = utils.as_matrix("Xs", Xs)
    Xt = utils.as_matrix("Xt", Xt, cols=Xs.shape[1])
    m = Xs.shape[1]
    _check_latent_dim(u, m)
    if not ridge > 0:
        raise ValueError(_("TCA ridge must be positive, got {0}").format(ridge))
    if Xs.shape[0] == 0 or Xt.shape[0] == 0:
        raise ValueError(_("TCA needs non-empty domains"))

    X = np.vstack([Xs, Xt])
    mean_gap = Xs.mean(axis=0) - Xt.mean(axis=0)
    discrepancy = np.outer(mean_gap, mean_gap) + ridge * np.eye(m)
    centered = X - X.mean(axis=0)
    spread = centered.T @ centered
    spread = 0.5 * (spread + spread.T)
    try:
        eigenvalues, eigenvectors = scipy.linalg.eigh(spread, discrepancy)
    except scipy.linalg.LinAlgError as error:
        raise RuntimeError(_("TCA generalized eigenproblem is singular: {0}").format(error))

    order = np.argsort(eigenvalues, kind="stable")[::-1][:u]
    W = eigenvectors[:, order]
    norms = np.linalg.norm(W, axis=0)
    if np.any(norms == 0) or not np.all(np.isfinite(W)):
        raise RuntimeError(_("TCA produced degenerate components"))
    return FactorMatrix(_fix_signs(W / norms))


def random_proj(m, u, seed):
    """Orthonormalized seeded standard-normal m x u draw"""
    _check_latent_dim(u, m)
    rng = np.random.default_rng(seed)
    Q, R = scipy.linalg.qr(rng.standard_normal((m, u)), mode="economic")
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return FactorMatrix(Q * signs)


def kpca_scores(Xt, u, delta):
    """
    Top-u kernel principal component scores of Xt under RBF(delta)

    :param Xt: n_t x m target rows
    :param u: Number of components
    :param delta: RBF bandwidth
    :return: n_t x u scores
    """
    Xt = utils.as_matrix("Xt", Xt)
    n = Xt.shape[0]
    if n < 2:
        raise ValueError(_("Kernel PCA needs at least two rows, got {0}").format(n))
    if u < 1:
        raise ValueError(_("Kernel PCA needs at least one component"))
    gram = kernels.rbf_gram(Xt, Xt, delta)
    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    centered = centering @ gram @ centering
    centered = 0.5 * (centered + centered.T)
    eigenvalues, eigenvectors = scipy.linalg.eigh(centered)
    order = np.argsort(eigenvalues, kind="stable")[::-1][:u]
    scores = eigenvectors[:, order] * np.sqrt(np.clip(eigenvalues[order], 0.0, None))
    return _fix_signs(scores)


def kpca_recover(Xt, u, delta):
    """Recover a linear W from the kernel PCA embedding of the target"""
    Xt = utils.as_matrix("Xt", Xt)
    return recover_w(Xt, kpca_scores(Xt, u, delta))


class ExtractorHandler(ABC):
    """Abstract base class defining interface for base extractors"""

    @classmethod
    @abstractmethod
    def name(cls):
        """Return the serialized extractor token"""
        pass

    @classmethod
    @abstractmethod
    def extract(cls, Xs, Xt, u, seed):
        """
        Produce a factor matrix for a domain pair

        Args:
            Xs (numpy.ndarray): Source rows
            Xt (numpy.ndarray): Target rows
            u (int): Requested latent dimension
            seed (int): Seed for randomized extractors

        Returns:
            FactorMatrix: m x u factor matrix (u_eff <= u for recovery)
        """
        pass


class JointPcaHandler(ExtractorHandler):
    @classmethod
    def name(cls):
        return ExtractorId.JOINT_PCA

    @classmethod
    def extract(cls, Xs, Xt, u, seed):
        return joint_pca(Xs, Xt, u)


class TargetPcaHandler(ExtractorHandler):
    @classmethod
    def name(cls):
        return ExtractorId.TARGET_PCA

    @classmethod
    def extract(cls, Xs, Xt, u, seed):
        return target_pca(Xt, u)


class TcaLiteHandler(ExtractorHandler):
    @classmethod
    def name(cls):
        return ExtractorId.TCA_LITE

    @classmethod
    def extract(cls, Xs, Xt, u, seed):
        return tca_lite(Xs, Xt, u)


class RandomProjHandler(ExtractorHandler):
    @classmethod
    def name(cls):
        return ExtractorId.RANDOM_PROJ

    @classmethod
    def extract(cls, Xs, Xt, u, seed):
        return random_proj(np.shape(Xt)[1], u, seed)


class KpcaRecoverHandler(ExtractorHandler):
    """Bandwidth taken as the mean squared distance between target rows"""

    @classmethod
    def name(cls):
        return ExtractorId.KPCA_RECOVER

    @classmethod
    def extract(cls, Xs, Xt, u, seed):
        return kpca_recover(Xt, u, kernels.mean_energy(Xt, Xt))


EXTRACTOR_HANDLERS_MAP = {
    ExtractorId.JOINT_PCA: JointPcaHandler,
    ExtractorId.TARGET_PCA: TargetPcaHandler,
    ExtractorId.TCA_LITE: TcaLiteHandler,
    ExtractorId.RANDOM_PROJ: RandomProjHandler,
    ExtractorId.KPCA_RECOVER: KpcaRecoverHandler,
}

ALL_EXTRACTORS = list(EXTRACTOR_HANDLERS_MAP)


def parse_extractor(token):
    try:
        return ExtractorId(str(token).strip().lower())
    except ValueError:
        raise ValueError(f"Unsupported extractor: {token}")


def get_extractor_handler(token):
    return EXTRACTOR_HANDLERS_MAP[parse_extractor(token)]


def extract(extractor, Xs, Xt, u, seed=0):
    """Run the named base extractor on a domain pair"""
    return get_extractor_handler(extractor).extract(Xs, Xt, u, seed)
