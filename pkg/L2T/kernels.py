#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# (C)2025 L2T-Reflect contributors

"""
RBF kernel family shared by the statistics, extractor and inference modules.

A kernel bank is an exponent grid scaled by the energy statistic eta:
bandwidth k is 2**exponent_k * eta. The grid is global so that features of
different experiences are comparable by kernel index, while eta is measured
per experience.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.spatial.distance import cdist

import L2T.utils as utils
import L2T.miscellaneous as miscellaneous

_ = miscellaneous.i18n

DEFAULT_LOW_EXPONENT = -8.0
DEFAULT_HIGH_EXPONENT = 8.0
DEFAULT_EXPONENT_STEP = 0.5


def exponent_grid(low=DEFAULT_LOW_EXPONENT, high=DEFAULT_HIGH_EXPONENT, step=DEFAULT_EXPONENT_STEP):
    """
    Inclusive grid low, low + step, ..., high

    Args:
        low (float): First exponent
        high (float): Last exponent, must be reachable from low in whole steps
        step (float): Positive exponent increment

    Returns:
        tuple: Exponents as floats
    """
    if step <= 0:
        raise ValueError(_("Exponent step must be positive, got {0}").format(step))
    if high < low:
        raise ValueError(_("Exponent range is empty: [{0}, {1}]").format(low, high))
    intervals = int(round((high - low) / step))
    if abs(low + intervals * step - high) > 1e-9:
        raise ValueError(_("Exponent range [{0}, {1}] is not a whole number of {2} steps").format(low, high, step))
    return tuple(float(low + i * step) for i in range(intervals + 1))


DEFAULT_EXPONENTS = exponent_grid()


@dataclass(frozen=True)
class KernelBank:
    """Ordered RBF bandwidths 2**e * eta for every exponent e of the grid"""

    eta: float
    exponents: Tuple[float, ...] = DEFAULT_EXPONENTS

    def __post_init__(self):
        if not np.isfinite(self.eta) or self.eta <= 0:
            raise ValueError(_("Energy statistic eta must be positive, got {0}").format(self.eta))
        if len(self.exponents) == 0:
            raise ValueError(_("Kernel bank needs at least one exponent"))
        if np.any(np.diff(np.asarray(self.exponents, dtype=np.float64)) <= 0):
            raise ValueError(_("Kernel bank exponents must be strictly increasing"))
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "exponents", tuple(float(e) for e in self.exponents))

    @property
    def bandwidths(self):
        return self.eta * np.exp2(np.asarray(self.exponents, dtype=np.float64))

    @property
    def count(self):
        return len(self.exponents)

    def rescaled(self, eta):
        """Same exponent grid, new energy statistic"""
        return KernelBank(eta, self.exponents)


def pairwise_sq_dists(A, B):
    """
    Squared Euclidean distances between the rows of A and the rows of B

    :param A: n_a x d matrix
    :param B: n_b x d matrix
    :return: n_a x n_b matrix
    """
    A = utils.as_matrix("A", A)
    B = utils.as_matrix("B", B, cols=A.shape[1])
    if A.shape[0] == 0 or B.shape[0] == 0 or A.shape[1] == 0:
        return np.zeros((A.shape[0], B.shape[0]))
    return np.maximum(cdist(A, B, "sqeuclidean"), 0.0)


def mean_energy(Zs, Zt):
    """
    Mean cross squared distance between embedded source and target rows.

    Falls back to 1 when every cross distance is zero; all Gram entries
    are 1 in that case whatever the bandwidth.
    """
    Zs = utils.as_matrix("Zs", Zs)
    Zt = utils.as_matrix("Zt", Zt, cols=Zs.shape[1])
    if Zs.shape[0] == 0 or Zt.shape[0] == 0:
        raise ValueError(_("Energy statistic needs non-empty domains, got {0} and {1} rows").format(
            Zs.shape[0], Zt.shape[0]))
    eta = float(np.mean(pairwise_sq_dists(Zs, Zt)))
    if eta == 0.0:
        return 1.0
    return eta


def make_bank(eta, low=DEFAULT_LOW_EXPONENT, high=DEFAULT_HIGH_EXPONENT, step=DEFAULT_EXPONENT_STEP):
    """
    Build the bandwidth bank 2**e * eta, e = low, low + step, ..., high

    With the defaults this is the 33-kernel bank whose middle bandwidth is eta.
    """
    return KernelBank(eta, exponent_grid(low, high, step))


def rbf_gram(A, B, delta):
    """
    Gram matrix exp(-||a - b||^2 / delta)

    Args:
        A (numpy.ndarray): n_a x d matrix
        B (numpy.ndarray): n_b x d matrix
        delta (float): Positive bandwidth

    Returns:
        numpy.ndarray: n_a x n_b Gram matrix
    """
    if not delta > 0:
        raise ValueError(_("RBF bandwidth must be positive, got {0}").format(delta))
    return np.exp(-pairwise_sq_dists(A, B) / delta)


def rbf_grams(sq_dists, bank):
    """Stack of one Gram matrix per bank kernel from shared squared distances"""
    sq_dists = np.asarray(sq_dists, dtype=np.float64)
    return np.exp(-sq_dists[np.newaxis, :, :] / bank.bandwidths[:, np.newaxis, np.newaxis])
