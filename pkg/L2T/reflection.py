#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# (C)2025 L2T-Reflect contributors

"""
The reflection function f and its training.

The inverse of f approximates the inverse improvement ratio of an experience:

    1/f = beta^T d + lambda beta^T Q beta + mu / (beta^T tau) + b

with d, Q and tau the per-kernel features of the experience. Training
minimizes the Huber loss of 1/f against the recorded inverse ratios plus
gamma1 (||beta||^2 + lambda^2 + mu^2) under beta, lambda, mu >= 0, using
projected gradient descent with backtracking from several starting points.
"""

import math
from dataclasses import dataclass, field, replace
from typing import List, Tuple

import numpy as np
from scipy.special import huber

import L2T.utils as utils
import L2T.kernels as kernels
import L2T.miscellaneous as miscellaneous
from L2T.stats import EPSILON

_ = miscellaneous.i18n

COMPONENTS = ("mmd", "variance", "discriminant")

MAX_BACKTRACKS = 100

#: b_corr candidates searched when the labeled-count correction is enabled
CORRECTION_GRID = tuple(range(0, 51))


def parse_components(components):
    """Validate a component selection and return it in canonical order"""
    if isinstance(components, str):
        components = utils.parse_csv(components)
    selected = set(components)
    unknown = selected.difference(COMPONENTS)
    if unknown:
        raise ValueError(_("Unknown reflection components: {0}").format(", ".join(sorted(unknown))))
    if not selected:
        raise ValueError(_("At least one reflection component must be enabled"))
    return tuple(name for name in COMPONENTS if name in selected)


@dataclass(eq=False)
class ReflectionModel:
    """
    Trained parameters of the reflection function

    bank holds the global exponent grid; its eta is a placeholder because
    every domain pair rescales the grid by its own energy statistic.
    """

    beta: np.ndarray
    lam: float
    mu: float
    bias: float
    bank: kernels.KernelBank
    components: Tuple[str, ...] = COMPONENTS
    b_corr: float = 0.0

    def __post_init__(self):
        self.beta = utils.check_finite("beta", self.beta).reshape(-1)
        self.lam = float(utils.check_finite("lambda", self.lam))
        self.mu = float(utils.check_finite("mu", self.mu))
        self.bias = float(utils.check_finite("bias", self.bias))
        self.components = parse_components(self.components)
        if self.beta.size != self.bank.count:
            raise ValueError(_("beta has {0} entries but the bank has {1} kernels").format(
                self.beta.size, self.bank.count))
        if np.any(self.beta < 0) or self.lam < 0 or self.mu < 0:
            raise ValueError(_("beta, lambda and mu must be nonnegative"))
        if self.b_corr < 0:
            raise ValueError(_("Correction parameter must be nonnegative, got {0}").format(self.b_corr))
        if "variance" not in self.components and self.lam != 0:
            raise ValueError(_("lambda must be 0 when the variance component is disabled"))
        if "discriminant" not in self.components and self.mu != 0:
            raise ValueError(_("mu must be 0 when the discriminant component is disabled"))

    @property
    def kernel_count(self):
        return self.bank.count

    @property
    def exponents(self):
        return self.bank.exponents


@dataclass
class TrainConfig:
    gamma1: float = 1e-3
    huber_delta: float = 1.0
    restarts: int = 5
    max_iters: int = 2000
    step_init: float = 1.0
    seed: int = 0
    grad_tol: float = 1e-6
    components: Tuple[str, ...] = COMPONENTS

    def __post_init__(self):
        if self.gamma1 < 0:
            raise ValueError(_("gamma1 must be nonnegative, got {0}").format(self.gamma1))
        if not self.huber_delta > 0:
            raise ValueError(_("Huber delta must be positive, got {0}").format(self.huber_delta))
        if self.restarts < 1 or self.max_iters < 1:
            raise ValueError(_("restarts and max_iters must be positive"))
        if not self.step_init > 0 or not self.grad_tol > 0:
            raise ValueError(_("step_init and grad_tol must be positive"))
        self.components = parse_components(self.components)


@dataclass
class CorrectionConfig:
    """Labeled-count correction of the improvement ratio"""

    p: int = 1
    q: int = 1
    b_corr: float = 0.0
    enabled: bool = False

    def __post_init__(self):
        if self.p < 1 or self.p > self.q:
            raise ValueError(_("Correction needs 1 <= p <= q, got p={0} q={1}").format(self.p, self.q))
        if self.b_corr < 0:
            raise ValueError(_("Correction parameter must be nonnegative, got {0}").format(self.b_corr))


@dataclass
class TrainingResult:
    model: ReflectionModel
    objective: float
    traces: List[List[float]] = field(default_factory=list)


def huber_loss(residual, delta):
    """
    Huber loss: r^2 / 2 inside [-delta, delta], delta (|r| - delta / 2) outside
    """
    if not delta > 0:
        raise ValueError(_("Huber delta must be positive, got {0}").format(delta))
    loss = huber(delta, np.asarray(residual, dtype=np.float64))
    if np.ndim(loss) == 0:
        return float(loss)
    return loss


def huber_grad(residual, delta):
    return np.clip(residual, -delta, delta)


def correct_ratio(l, n_labeled, cfg):
    """
    Labeled-count corrected ratio

        l (n + b) / n * (1 - b / (q - p) * log((q + b) / (p + b)))

    Returns l unchanged when the correction is disabled, b = 0 or p = q.
    """
    if not l > 0:
        raise ValueError(_("Improvement ratio must be positive, got {0}").format(l))
    if cfg is None or not cfg.enabled or cfg.b_corr == 0 or cfg.p == cfg.q:
        return l
    if n_labeled < 1:
        raise ValueError(_("Correction needs a positive labeled count, got {0}").format(n_labeled))
    b = float(cfg.b_corr)
    n = float(n_labeled)
    spread = b / (cfg.q - cfg.p) * math.log((cfg.q + b) / (cfg.p + b))
    return l * (n + b) / n * (1.0 - spread)


def predict_inverse_ratio(model, feats):
    """
    1/f = beta^T d + lambda beta^T Q beta + mu / (beta^T tau + eps) + b

    Disabled components contribute nothing.
    """
    if feats.kernel_count != model.kernel_count:
        raise ValueError(_("Features have {0} kernels but the model has {1}").format(
            feats.kernel_count, model.kernel_count))
    beta = model.beta
    value = model.bias
    if "mmd" in model.components:
        value += float(beta @ feats.mmd)
    if "variance" in model.components:
        value += model.lam * float(beta @ feats.variance @ beta)
    if "discriminant" in model.components:
        value += model.mu / (float(beta @ feats.discriminant) + EPSILON)
    return value


class TrainingProblem:
    """
    Vectorized training objective over a list of experiences.

    Parameters are packed as theta = [beta, lambda, mu, b].
    """

    def __init__(self, features, cfg, targets=None):
        if len(features) == 0:
            raise ValueError(_("Training needs at least one experience"))
        exponents = features[0].bank.exponents
        for feats in features:
            if feats.bank.exponents != exponents:
                raise ValueError(_("All experiences must share the bandwidth exponent grid"))
        self.cfg = cfg
        self.exponents = exponents
        self.kernel_count = len(exponents)
        self.mmd = utils.check_finite("mmd features", np.stack([f.mmd for f in features]))
        self.variance = utils.check_finite("variance features", np.stack([f.variance for f in features]))
        self.discriminant = utils.check_finite("discriminant features", np.stack([f.discriminant for f in features]))
        if targets is None:
            targets = [f.inverse_ratio_target for f in features]
        self.targets = utils.check_finite("targets", targets).reshape(-1)
        self.use_mmd = "mmd" in cfg.components
        self.use_variance = "variance" in cfg.components
        self.use_discriminant = "discriminant" in cfg.components

    def unpack(self, theta):
        N = self.kernel_count
        return theta[:N], theta[N], theta[N + 1], theta[N + 2]

    def pack(self, beta, lam, mu, bias):
        return np.concatenate([np.asarray(beta, dtype=np.float64), [lam, mu, bias]])

    def project(self, theta):
        theta = theta.copy()
        N = self.kernel_count
        theta[:N + 2] = np.maximum(theta[:N + 2], 0.0)
        if not self.use_variance:
            theta[N] = 0.0
        if not self.use_discriminant:
            theta[N + 1] = 0.0
        return theta

    def _parts(self, theta):
        beta, lam, mu, bias = self.unpack(theta)
        quadratic = np.einsum("eij,i,j->e", self.variance, beta, beta)
        denominator = self.discriminant @ beta + EPSILON
        prediction = bias + lam * quadratic + mu / denominator
        if self.use_mmd:
            prediction = prediction + self.mmd @ beta
        return prediction, quadratic, denominator

    def predictions(self, theta):
        return self._parts(theta)[0]

    def objective(self, theta):
        beta, lam, mu, _bias = self.unpack(theta)
        residual = self.predictions(theta) - self.targets
        penalty = self.cfg.gamma1 * (beta @ beta + lam * lam + mu * mu)
        return float(np.sum(huber(self.cfg.huber_delta, residual)) + penalty)

    def gradient(self, theta):
        beta, lam, mu, _bias = self.unpack(theta)
        prediction, quadratic, denominator = self._parts(theta)
        psi = huber_grad(prediction - self.targets, self.cfg.huber_delta)
        gamma1 = self.cfg.gamma1

        g_beta = 2.0 * lam * np.einsum("e,eij,j->i", psi, self.variance, beta)
        g_beta -= mu * (self.discriminant.T @ (psi / denominator ** 2))
        if self.use_mmd:
            g_beta += self.mmd.T @ psi
        g_beta += 2.0 * gamma1 * beta
        g_lam = psi @ quadratic + 2.0 * gamma1 * lam if self.use_variance else 0.0
        g_mu = psi @ (1.0 / denominator) + 2.0 * gamma1 * mu if self.use_discriminant else 0.0
        return self.pack(g_beta, g_lam, g_mu, psi.sum())

    def projected_gradient_norm(self, theta, gradient):
        return float(np.linalg.norm(theta - self.project(theta - gradient)))

    def initial_points(self):
        """Zero start first, then seeded uniform starts in [0, 1 / N_k]"""
        rng = np.random.default_rng(self.cfg.seed)
        N = self.kernel_count
        bias = float(np.mean(self.targets))
        points = [self.pack(np.zeros(N), 0.0, 0.0, bias)]
        for _restart in range(1, self.cfg.restarts):
            draw = rng.uniform(0.0, 1.0 / N, size=N + 2)
            points.append(self.project(self.pack(draw[:N], draw[N], draw[N + 1], bias)))
        return points

    def model(self, theta, b_corr=0.0):
        beta, lam, mu, bias = self.unpack(self.project(theta))
        return ReflectionModel(beta=beta.copy(), lam=lam, mu=mu, bias=bias,
                               bank=kernels.KernelBank(1.0, self.exponents),
                               components=self.cfg.components, b_corr=b_corr)


def projected_gradient_descent(problem, theta0, cfg):
    """
    Projected gradient descent with backtracking

    A step t is accepted when the projected candidate satisfies the
    sufficient-decrease bound f(c) <= f + g^T (c - theta) + ||c - theta||^2 / (2t);
    the next trial step is twice the last accepted one.

    Returns:
        tuple: (theta, trace of accepted objective values)
    """
    theta = problem.project(np.asarray(theta0, dtype=np.float64))
    value = problem.objective(theta)
    gradient = problem.gradient(theta)
    step = cfg.step_init
    trace = [value]

    for _iteration in range(cfg.max_iters):
        if problem.projected_gradient_norm(theta, gradient) <= cfg.grad_tol:
            break
        accepted = False
        trial = step
        for _backtrack in range(MAX_BACKTRACKS):
            candidate = problem.project(theta - trial * gradient)
            move = candidate - theta
            candidate_value = problem.objective(candidate)
            bound = value + gradient @ move + (move @ move) / (2.0 * trial)
            if np.isfinite(candidate_value) and candidate_value <= bound:
                accepted = True
                break
            trial *= 0.5
        if not accepted or not np.any(move):
            break
        theta, value = candidate, candidate_value
        gradient = problem.gradient(theta)
        trace.append(value)
        step = 2.0 * trial
    return theta, trace


def _correction_targets(features, correction):
    return [1.0 / correct_ratio(f.ratio, f.n_labeled, correction) for f in features]


def fit_reflection(features, cfg=None, correction=None):
    """
    Train from every starting point and keep the lowest final objective

    Ties go to the earlier restart.

    Returns:
        TrainingResult: Best model, its objective and the per-restart traces
    """
    cfg = cfg or TrainConfig()
    targets = None
    b_corr = 0.0
    if correction is not None and correction.enabled:
        targets = _correction_targets(features, correction)
        b_corr = float(correction.b_corr)
    problem = TrainingProblem(features, cfg, targets)

    best_theta, best_value, traces = None, None, []
    for index, start in enumerate(problem.initial_points()):
        theta, trace = projected_gradient_descent(problem, start, cfg)
        traces.append(trace)
        if utils.verbose:
            utils.print_with_color(_("Restart {0}: objective {1:.6g} after {2} steps").format(
                index, trace[-1], len(trace) - 1), "green")
        if best_value is None or trace[-1] < best_value:
            best_theta, best_value = theta, trace[-1]
    return TrainingResult(problem.model(best_theta, b_corr), best_value, traces)


def train_reflection(features, cfg=None, correction=None):
    """
    Fit the reflection function to a list of ExperienceFeatures

    Args:
        features (list): ExperienceFeatures of the training experiences
        cfg (TrainConfig, optional): Training configuration
        correction (CorrectionConfig, optional): Ratio correction with fixed b_corr

    Returns:
        ReflectionModel: Model satisfying all nonnegativity constraints
    """
    return fit_reflection(features, cfg, correction).model


def fit_correction(features, cfg=None, correction=None, grid=CORRECTION_GRID):
    """
    Choose b_corr by grid search on the training objective

    Without an enabled correction this is a plain training run.

    Returns:
        tuple: (TrainingResult, chosen b_corr)
    """
    if correction is None or not correction.enabled:
        return fit_reflection(features, cfg), 0.0
    best, best_b = None, None
    for b in grid:
        result = fit_reflection(features, cfg, replace(correction, b_corr=float(b)))
        if best is None or result.objective < best.objective:
            best, best_b = result, float(b)
    if utils.verbose:
        utils.print_with_color(_("Selected correction parameter b = {0:g}").format(best_b), "blue")
    return best, best_b


def training_objective(model, features, cfg=None, correction=None):
    """Training objective of an existing model on a list of features"""
    cfg = cfg or TrainConfig(components=model.components)
    targets = _correction_targets(features, correction) if correction is not None and correction.enabled else None
    problem = TrainingProblem(features, replace(cfg, components=model.components), targets)
    return problem.objective(problem.pack(model.beta, model.lam, model.mu, model.bias))
