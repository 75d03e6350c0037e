#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# (C)2025 L2T-Reflect contributors

"""
Inference of the factor matrix W for a new domain pair.

With a trained reflection model, W minimizes

    beta^T d(W) + lambda beta^T Q(W) beta + mu / (beta^T tau(W)) + gamma2 ||W||_F^2

where d, Q and tau are the kernel statistics of the embedded pair. The
kernel bank is frozen at the initialization embedding and the row pairing of
Q is fixed per call, so the objective stays a fixed function of W. The
minimization uses Polak-Ribiere nonlinear conjugate gradient with Armijo
backtracking, by default over orthonormal frames, where tau cannot be raised
by collapsing W towards rank one. With orthonormal=False the iterates are
unconstrained.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np
import scipy.linalg

import L2T.utils as utils
import L2T.kernels as kernels
import L2T.stats as stats
import L2T.factors as factors
import L2T.reflection as reflection
import L2T.miscellaneous as miscellaneous

_ = miscellaneous.i18n

ARMIJO_C = 1e-4
BACKTRACK_FACTOR = 0.5
INITIAL_STEP = 1.0
MAX_BACKTRACKS = 60


@dataclass
class InferConfig:
    gamma2: float = 1e-3
    u: int = 10
    r: int = stats.DEFAULT_NEIGHBORS
    max_iters: int = 100
    grad_tol: float = 1e-6
    restarts: int = 3
    seed: int = 0
    orthonormal: bool = True

    def __post_init__(self):
        if self.gamma2 < 0:
            raise ValueError(_("gamma2 must be nonnegative, got {0}").format(self.gamma2))
        if self.u < 1 or self.r < 1:
            raise ValueError(_("u and r must be positive"))
        if self.max_iters < 1 or self.restarts < 1:
            raise ValueError(_("max_iters and restarts must be positive"))
        if not self.grad_tol > 0:
            raise ValueError(_("grad_tol must be positive, got {0}").format(self.grad_tol))


@dataclass
class InferenceResult:
    w: factors.FactorMatrix
    objective: float
    initial_objectives: List[float] = field(default_factory=list)
    traces: List[List[float]] = field(default_factory=list)


def _pair_gradient(X, Y, Zx, Zy, C):
    # sum_ij C_ij (x_i - y_j)(x_i - y_j)^T W
    return (X.T @ (C.sum(axis=1)[:, np.newaxis] * Zx - C @ Zy)
            + Y.T @ (C.sum(axis=0)[:, np.newaxis] * Zy - C.T @ Zx))


def _kernel_weights(grams, coefficients):
    # sum_k coefficients_k K_k
    return np.tensordot(coefficients, grams, axes=1)


class InferenceProblem:
    """
    The W objective of one domain pair under a trained model

    Args:
        Xs (numpy.ndarray): Raw source rows
        Xt (numpy.ndarray): Raw target rows
        model (ReflectionModel): Trained reflection model
        gamma2 (float): Weight of the Frobenius regularizer
        r (int): Neighbor count of the discriminant criterion
        seed (int): Seed of the variance row pairing
        W_init (numpy.ndarray): Embedding whose energy statistic freezes the bank
    """

    def __init__(self, Xs, Xt, model, gamma2, r, seed, W_init):
        self.Xs = utils.as_matrix("source features", Xs)
        self.Xt = utils.as_matrix("target features", Xt, cols=self.Xs.shape[1])
        W_init = factors.as_factor(W_init).entries
        if W_init.shape[0] != self.m:
            raise ValueError(_("W must have {0} rows, got shape {1}").format(self.m, W_init.shape))
        self.model = model
        self.gamma2 = float(gamma2)
        self.seed = seed
        self.bank = model.bank.rescaled(kernels.mean_energy(self.Xs @ W_init, self.Xt @ W_init))
        self.local, self.non_local = stats.stack_scatter(stats.scatter_matrices(self.Xt, self.bank, r))
        self.idx_s, self.idx_t = stats.paired_indices(self.Xs.shape[0], self.Xt.shape[0], seed)
        self.S = self.Xs[self.idx_s]
        self.T = self.Xt[self.idx_t]
        self.use_mmd = "mmd" in model.components
        self.use_variance = "variance" in model.components and model.lam != 0
        self.use_discriminant = "discriminant" in model.components and model.mu != 0

    @property
    def m(self):
        return self.Xs.shape[1]

    def _check(self, W):
        W = factors.as_factor(W).entries
        if W.shape[0] != self.m:
            raise ValueError(_("W must have {0} rows, got shape {1}").format(self.m, W.shape))
        return W

    def terms(self, W):
        """
        Individual objective terms

        Returns:
            dict: mmd, variance, discriminant and regularizer values
        """
        W = self._check(W)
        beta = self.model.beta
        Zs, Zt = self.Xs @ W, self.Xt @ W
        values = {"mmd": 0.0, "variance": 0.0, "discriminant": 0.0,
                  "regularizer": self.gamma2 * float(np.sum(W * W))}
        if self.use_mmd:
            values["mmd"] = float(beta @ stats.mmd_vector(Zs, Zt, self.bank))
        if self.use_variance:
            Q = stats.variance_matrix(Zs, Zt, self.bank, self.seed)
            values["variance"] = self.model.lam * float(beta @ Q @ beta)
        if self.use_discriminant:
            tau = stats.trace_form(self.non_local, W) / (stats.trace_form(self.local, W) + stats.EPSILON)
            values["discriminant"] = self.model.mu / (float(beta @ tau) + stats.EPSILON)
        return values

    def objective(self, W):
        total = sum(self.terms(W).values())
        return float(utils.check_finite("objective", total))

    def gradient(self, W):
        """Analytic gradient with the scatter matrices held constant"""
        W = self._check(W)
        beta = self.model.beta
        slopes = -2.0 / self.bank.bandwidths
        gradient = 2.0 * self.gamma2 * W

        if self.use_mmd:
            Zs, Zt = self.Xs @ W, self.Xt @ W
            ns, nt = Zs.shape[0], Zt.shape[0]
            weights = beta * slopes
            k_ss = kernels.rbf_grams(kernels.pairwise_sq_dists(Zs, Zs), self.bank)
            k_tt = kernels.rbf_grams(kernels.pairwise_sq_dists(Zt, Zt), self.bank)
            k_st = kernels.rbf_grams(kernels.pairwise_sq_dists(Zs, Zt), self.bank)
            gradient = gradient + _pair_gradient(self.Xs, self.Xs, Zs, Zs, _kernel_weights(k_ss, weights) / ns ** 2)
            gradient = gradient + _pair_gradient(self.Xt, self.Xt, Zt, Zt, _kernel_weights(k_tt, weights) / nt ** 2)
            gradient = gradient + _pair_gradient(self.Xs, self.Xt, Zs, Zt,
                                                 -2.0 * _kernel_weights(k_st, weights) / (ns * nt))

        n = self.idx_s.size
        if self.use_variance and n >= 2:
            S, T = self.S, self.T
            Zs, Zt = S @ W, T @ W
            k_ss = kernels.rbf_grams(kernels.pairwise_sq_dists(Zs, Zs), self.bank)
            k_tt = kernels.rbf_grams(kernels.pairwise_sq_dists(Zt, Zt), self.bank)
            k_st = kernels.rbf_grams(kernels.pairwise_sq_dists(Zs, Zt), self.bank)
            combined = _kernel_weights(k_ss + k_tt - 2.0 * k_st, beta)
            A = 2.0 * self.model.lam * (combined - combined.mean()) / (n * n - 1.0)
            weights = beta * slopes
            gradient = gradient + _pair_gradient(S, S, Zs, Zs, _kernel_weights(k_ss, weights) * A)
            gradient = gradient + _pair_gradient(T, T, Zt, Zt, _kernel_weights(k_tt, weights) * A)
            gradient = gradient + _pair_gradient(S, T, Zs, Zt, -2.0 * _kernel_weights(k_st, weights) * A)

        if self.use_discriminant:
            SLW = self.local @ W
            SNW = self.non_local @ W
            local = np.sum(W * SLW, axis=(1, 2)) + stats.EPSILON
            non_local = np.sum(W * SNW, axis=(1, 2))
            total = float(beta @ (non_local / local)) + stats.EPSILON
            d_tau = (2.0 * SNW * local[:, None, None] - 2.0 * non_local[:, None, None] * SLW) / local[:, None, None] ** 2
            gradient = gradient - self.model.mu / total ** 2 * np.tensordot(beta, d_tau, axes=1)

        return utils.check_finite("gradient", gradient)

    def finite_diff_check(self, W, step=1e-5):
        """
        Largest disagreement between the analytic gradient and central differences

        Relative error where |analytic| > 1e-8, absolute error elsewhere.
        """
        if not step > 0:
            raise ValueError(_("Finite-difference step must be positive, got {0}").format(step))
        W = self._check(W).copy()
        analytic = self.gradient(W)
        worst = 0.0
        for index in np.ndindex(*W.shape):
            original = W[index]
            W[index] = original + step
            upper = self.objective(W)
            W[index] = original - step
            lower = self.objective(W)
            W[index] = original
            numeric = (upper - lower) / (2.0 * step)
            error = abs(numeric - analytic[index])
            if abs(analytic[index]) > 1e-8:
                error /= abs(analytic[index])
            worst = max(worst, error)
        return worst


def build_problem(source, target, model, cfg, W_init=None):
    """InferenceProblem with the bank frozen at W_init, joint PCA by default"""
    Xs = utils.as_matrix("source features", source.features)
    Xt = utils.as_matrix("target features", target.features, cols=Xs.shape[1])
    if cfg.u > Xs.shape[1]:
        raise ValueError(_("Latent dimension u={0} exceeds feature dimension m={1}").format(cfg.u, Xs.shape[1]))
    if W_init is None:
        W_init = factors.joint_pca(Xs, Xt, cfg.u)
    return InferenceProblem(Xs, Xt, model, cfg.gamma2, cfg.r, cfg.seed, W_init)


def objective(W, source, target, model, cfg):
    """Objective value at W, with the bank frozen at W itself"""
    return build_problem(source, target, model, cfg, W).objective(W)


def analytic_gradient(W, source, target, model, cfg):
    """Gradient at W, with the bank frozen at W itself"""
    return build_problem(source, target, model, cfg, W).gradient(W)


def finite_diff_check(W, source, target, model, cfg, step=1e-5):
    return build_problem(source, target, model, cfg, W).finite_diff_check(W, step)


def _tangent(W, G):
    # Projection onto the tangent space of orthonormal frames at W
    skew = 0.5 * (W.T @ G - G.T @ W)
    return W @ skew + G - W @ (W.T @ G)


def _retract(W):
    # Orthonormal factor with a positive R diagonal
    Q, R = scipy.linalg.qr(W, mode="economic")
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def conjugate_gradient(problem, W0, cfg):
    """
    Polak-Ribiere nonlinear conjugate gradient with Armijo backtracking

    The direction is reset to steepest descent every m * u iterations and
    whenever it fails to be a descent direction. The first trial step is 1.0,
    later ones start from the previous accepted step scaled by the ratio of
    directional slopes, capped at 1.0.

    With cfg.orthonormal the iterates stay on orthonormal frames: gradients
    and the previous direction are projected onto the tangent space and
    every trial point is retracted by a QR factorization.

    Returns:
        tuple: (W, objective, trace of accepted objective values)
    """
    frames = cfg.orthonormal
    W = factors.as_factor(W0).entries.copy()
    if frames and not np.allclose(W.T @ W, np.eye(W.shape[1]), rtol=0.0, atol=1e-12):
        W = _retract(W)
    value = problem.objective(W)
    gradient = problem.gradient(W)
    if frames:
        gradient = _tangent(W, gradient)
    direction = -gradient
    period = max(W.size, 1)
    since_reset = 0
    last_step = last_slope = None
    trace = [value]

    for _iteration in range(cfg.max_iters):
        if np.linalg.norm(gradient) <= cfg.grad_tol:
            break
        slope = float(np.sum(gradient * direction))
        if slope >= 0:
            direction = -gradient
            slope = -float(np.sum(gradient * gradient))
            since_reset = 0

        if last_step is None:
            step = INITIAL_STEP
        else:
            step = min(INITIAL_STEP, last_step * last_slope / slope)
        accepted = False
        for _backtrack in range(MAX_BACKTRACKS):
            candidate = W + step * direction
            if frames:
                candidate = _retract(candidate)
            candidate_value = problem.objective(candidate)
            if candidate_value <= value + ARMIJO_C * step * slope:
                accepted = True
                break
            step *= BACKTRACK_FACTOR
        if not accepted:
            break
        last_step, last_slope = step, slope

        new_gradient = problem.gradient(candidate)
        previous_norm = float(np.sum(gradient * gradient))
        if frames:
            new_gradient = _tangent(candidate, new_gradient)
            gradient = _tangent(candidate, gradient)
            direction = _tangent(candidate, direction)
        since_reset += 1
        if since_reset >= period:
            direction = -new_gradient
            since_reset = 0
        else:
            beta_pr = float(np.sum(new_gradient * (new_gradient - gradient))) / previous_norm
            direction = -new_gradient + max(beta_pr, 0.0) * direction
        W, value, gradient = candidate, candidate_value, new_gradient
        trace.append(value)
    return W, value, trace


def run_inference(source, target, model, cfg=None):
    """
    Conjugate gradient from joint PCA and (restarts - 1) random projections

    All starts share the bank frozen at the joint PCA embedding. The lowest
    final objective wins, ties going to the earlier start.

    Returns:
        InferenceResult: Winning W with the objectives and traces of every start
    """
    cfg = cfg or InferConfig()
    problem = build_problem(source, target, model, cfg)
    starts = [factors.joint_pca(problem.Xs, problem.Xt, cfg.u).entries]
    for seed in utils.child_seeds(cfg.seed, cfg.restarts - 1):
        starts.append(factors.random_proj(problem.m, cfg.u, seed).entries)

    result = None
    for index, start in enumerate(starts):
        W, value, trace = conjugate_gradient(problem, start, cfg)
        if utils.verbose:
            utils.print_with_color(_("Start {0}: objective {1:.6g} -> {2:.6g} in {3} steps").format(
                index, trace[0], value, len(trace) - 1), "green")
        if result is None:
            result = InferenceResult(factors.FactorMatrix(W), value)
        elif value < result.objective:
            result.w, result.objective = factors.FactorMatrix(W), value
        result.initial_objectives.append(trace[0])
        result.traces.append(trace)
    return result


def infer_w(source, target, model, cfg=None):
    """Factor matrix minimizing the W objective for a domain pair"""
    return run_inference(source, target, model, cfg).w


def random_gradient_instance(seed):
    """
    Seeded small instance exercising every objective term

    Returns:
        tuple: (W, source, target, model, cfg)
    """
    from L2T.pipeline import Domain

    rng = np.random.default_rng(seed)
    m = int(rng.integers(4, 9))
    u = int(rng.integers(1, min(m, 4) + 1))
    ns, nt = int(rng.integers(8, 16)), int(rng.integers(8, 16))
    source = Domain(rng.standard_normal((ns, m)), name="source")
    target = Domain(rng.standard_normal((nt, m)) + 0.5, name="target")
    W = 0.5 * rng.standard_normal((m, u))
    bank = kernels.KernelBank(1.0)
    model = reflection.ReflectionModel(
        beta=rng.uniform(0.1, 1.0, bank.count),
        lam=float(rng.uniform(0.1, 1.0)),
        mu=float(rng.uniform(0.1, 1.0)),
        bias=0.0,
        bank=bank,
    )
    cfg = InferConfig(gamma2=0.1, u=u, r=3, seed=int(rng.integers(0, 2 ** 31)))
    return W, source, target, model, cfg
