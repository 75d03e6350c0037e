#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# (C)2025 L2T-Reflect contributors

"""
Experience data model and the end-to-end transfer protocol.

Synthetic domain pairs stand in for sampled image categories; transfer
performance is measured with a 1-nearest-neighbor classifier on a seeded
stratified split of the target domain. Experiences record the pair, the
base extractor, its factor matrix and the resulting improvement ratio.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

import L2T.utils as utils
import L2T.kernels as kernels
import L2T.stats as stats
import L2T.factors as factors
import L2T.inference as inference
import L2T.reflection as reflection
import L2T.miscellaneous as miscellaneous

_ = miscellaneous.i18n

L2T_METHOD = "l2t"


@dataclass(eq=False)
class Domain:
    """Feature matrix with optional class labels"""

    features: np.ndarray
    labels: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        self.features = utils.as_matrix("features", self.features)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.ndim != 1 or labels.size != self.features.shape[0]:
                raise ValueError(_("Domain {0}: expected {1} labels, got shape {2}").format(
                    self.name, self.features.shape[0], labels.shape))
            if labels.size and (np.any(labels < 0) or np.any(labels != np.round(labels))):
                raise ValueError(_("Domain {0}: labels must be nonnegative class indices").format(self.name))
            self.labels = labels.astype(np.int64)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def m(self):
        return self.features.shape[1]


@dataclass(eq=False)
class Experience:
    source: Domain
    target: Domain
    extractor: factors.ExtractorId
    w: factors.FactorMatrix
    n_labeled: int
    ratio: float
    seed: int
    floored: bool = False

    def __post_init__(self):
        self.extractor = factors.parse_extractor(self.extractor)
        self.w = factors.as_factor(self.w)
        if not self.ratio > 0:
            raise ValueError(_("Improvement ratio must be positive, got {0}").format(self.ratio))
        if self.w.m != self.source.m or self.w.m != self.target.m:
            raise ValueError(_("W has {0} rows but the domains have {1} and {2} features").format(
                self.w.m, self.source.m, self.target.m))


@dataclass(eq=False)
class ExperienceStore:
    experiences: List[Experience] = field(default_factory=list)
    exponents: Tuple[float, ...] = kernels.DEFAULT_EXPONENTS

    def __post_init__(self):
        self.exponents = tuple(float(e) for e in self.exponents)
        dims = {e.source.m for e in self.experiences}
        if len(dims) > 1:
            raise ValueError(_("All experiences must share the feature dimension, got {0}").format(sorted(dims)))

    @property
    def count(self):
        return len(self.experiences)

    @property
    def extractor_count(self):
        return len({e.extractor for e in self.experiences})

    @property
    def m(self):
        return self.experiences[0].source.m if self.experiences else None


@dataclass
class SynthConfig:
    m: int = 50
    u_true: int = 10
    classes_per_domain: int = 3
    samples_per_class: int = 20
    relatedness: float = 0.8
    noise_sigma: float = 0.1
    seed: int = 0
    class_spread: float = 1.0

    def __post_init__(self):
        if self.u_true < 1 or self.u_true > self.m:
            raise ValueError(_("u_true must lie in [1, m={0}], got {1}").format(self.m, self.u_true))
        if not 0.0 <= self.relatedness <= 1.0:
            raise ValueError(_("relatedness must lie in [0, 1], got {0}").format(self.relatedness))
        if self.noise_sigma < 0 or self.class_spread < 0:
            raise ValueError(_("noise_sigma and class_spread must be nonnegative"))
        if self.classes_per_domain < 1 or self.samples_per_class < 1:
            raise ValueError(_("classes_per_domain and samples_per_class must be positive"))


@dataclass
class TransferOutcome:
    ratio: float
    p_t: float
    p_st: float
    test_count: int
    floored: bool


@dataclass
class ReportRow:
    pair_id: int
    method: str
    ratio: float


@dataclass
class EvaluationReport:
    n_labeled: int
    rows: List[ReportRow] = field(default_factory=list)

    def means(self):
        """Arithmetic mean ratio per method, in first-seen method order"""
        grouped = {}
        for row in self.rows:
            grouped.setdefault(row.method, []).append(row.ratio)
        return {method: float(np.mean(ratios)) for method, ratios in grouped.items()}

    def ratios(self, method):
        return [row.ratio for row in self.rows if row.method == method]

    def to_dict(self):
        return {
            "n_labeled": self.n_labeled,
            "rows": [{"pair_id": row.pair_id, "method": row.method, "ratio": row.ratio} for row in self.rows],
            "means": self.means(),
        }


def _orthonormal_frame(rng, m, columns, keep=None):
    # Orthonormal m x columns frame whose leading columns span `keep`
    draw = rng.standard_normal((m, columns))
    if keep is not None and keep.shape[1]:
        draw[:, :keep.shape[1]] = keep
    Q, R = scipy.linalg.qr(draw, mode="economic")
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def _sample_domain(rng, frame, means, cfg, name):
    classes, u = means.shape
    latent = np.repeat(means, cfg.samples_per_class, axis=0)
    latent = latent + rng.standard_normal((classes * cfg.samples_per_class, u))
    features = latent @ frame.T + cfg.noise_sigma * rng.standard_normal((latent.shape[0], frame.shape[0]))
    labels = np.repeat(np.arange(classes), cfg.samples_per_class)
    return Domain(features, labels, name)


def gen_pair(cfg):
    """
    Synthetic source/target pair sharing part of its latent structure

    The target frame keeps round(relatedness * u_true) source directions and
    its class means are relatedness * source means + (1 - relatedness) * fresh
    means. Source class c maps to target class c.

    Args:
        cfg (SynthConfig): Generator configuration

    Returns:
        tuple: (source Domain, target Domain)
    """
    rng = np.random.default_rng(cfg.seed)
    shape = (cfg.classes_per_domain, cfg.u_true)
    source_frame = _orthonormal_frame(rng, cfg.m, cfg.u_true)
    shared = int(round(cfg.relatedness * cfg.u_true))
    target_frame = _orthonormal_frame(rng, cfg.m, cfg.u_true, source_frame[:, :shared])
    source_means = cfg.class_spread * rng.standard_normal(shape)
    fresh_means = cfg.class_spread * rng.standard_normal(shape)
    target_means = cfg.relatedness * source_means + (1.0 - cfg.relatedness) * fresh_means
    source = _sample_domain(rng, source_frame, source_means, cfg, "source")
    target = _sample_domain(rng, target_frame, target_means, cfg, "target")
    return source, target


def generate_pairs(n, synth, seed):
    """Held-out domain pairs, one derived seed per pair"""
    return [gen_pair(replace(synth, seed=child)) for child in utils.child_seeds(seed, n)]


def nn_accuracy(train_emb, train_labels, test_emb, test_labels):
    """
    1-nearest-neighbor accuracy under Euclidean distance

    Distance ties go to the lower training row.
    """
    train_emb = utils.as_matrix("train rows", train_emb)
    test_emb = utils.as_matrix("test rows", test_emb, cols=train_emb.shape[1])
    train_labels = np.asarray(train_labels)
    test_labels = np.asarray(test_labels)
    if train_emb.shape[0] == 0:
        raise ValueError(_("Nearest-neighbor classifier needs a non-empty training set"))
    if test_emb.shape[0] == 0:
        raise ValueError(_("Nearest-neighbor accuracy needs a non-empty test set"))
    if train_labels.size != train_emb.shape[0] or test_labels.size != test_emb.shape[0]:
        raise ValueError(_("Label counts do not match row counts"))
    nearest = np.argmin(kernels.pairwise_sq_dists(test_emb, train_emb), axis=1)
    return float(np.mean(train_labels[nearest] == test_labels))


def labeled_split(labels, n_labeled, rng):
    """
    Stratified choice of labeled rows

    One row per present class first (classes drawn at random when n_labeled
    is smaller than the class count), the rest uniformly from what remains.

    Returns:
        tuple: (sorted labeled indices, sorted test indices)
    """
    labels = np.asarray(labels)
    n = labels.size
    classes = np.unique(labels)
    if n_labeled >= n:
        raise ValueError(_("n_labeled={0} must be smaller than the target row count {1}").format(n_labeled, n))
    if n_labeled < 2 or classes.size < 2:
        raise ValueError(_("Labeled rows must cover at least two classes (n_labeled={0}, classes={1})").format(
            n_labeled, classes.size))
    if n_labeled < classes.size:
        classes = np.sort(rng.choice(classes, size=n_labeled, replace=False))
    chosen = [int(rng.choice(np.flatnonzero(labels == c))) for c in classes]
    remaining = np.setdiff1d(np.arange(n), chosen)
    extra = rng.choice(remaining, size=n_labeled - len(chosen), replace=False)
    labeled = np.sort(np.concatenate([np.asarray(chosen, dtype=np.int64), extra.astype(np.int64)]))
    return labeled, np.setdiff1d(np.arange(n), labeled)


def evaluate_transfer(source, target, w, n_labeled, seed, use_source=True):
    """
    Accuracy with and without transfer on one seeded target split

    Both accuracies are floored at 1 / test_count, so the ratio lies in
    (0, test_count]. Labeled target rows precede source rows in the
    transfer training set.

    Args:
        source (Domain): Labeled source domain, all rows used for training
        target (Domain): Labeled target domain
        w (FactorMatrix): Factor matrix to evaluate
        n_labeled (int): Labeled target rows
        seed (int): Seed of the split
        use_source (bool): Include the source rows in the transfer training set

    Returns:
        TransferOutcome: Ratio, both accuracies and whether the floor applied
    """
    W = factors.as_factor(w).entries
    if target.labels is None or (use_source and source.labels is None):
        raise ValueError(_("Transfer evaluation needs labeled domains"))
    if W.shape[0] != target.m:
        raise ValueError(_("W must have {0} rows, got shape {1}").format(target.m, W.shape))

    rng = np.random.default_rng(seed)
    train, test = labeled_split(target.labels, n_labeled, rng)
    Xt, yt = target.features, target.labels
    p_t = nn_accuracy(Xt[train], yt[train], Xt[test], yt[test])

    Zt = Xt @ W
    train_emb, train_labels = Zt[train], yt[train]
    if use_source:
        train_emb = np.vstack([train_emb, source.features @ W])
        train_labels = np.concatenate([train_labels, source.labels])
    p_st = nn_accuracy(train_emb, train_labels, Zt[test], yt[test])

    floor = 1.0 / test.size
    floored = p_t < floor or p_st < floor
    if floored:
        utils.print_with_color(_("Warning: accuracy floor 1/{0} applied").format(test.size), "yellow")
    return TransferOutcome(max(p_st, floor) / max(p_t, floor), p_t, p_st, int(test.size), floored)


def improvement_ratio(source, target, w, n_labeled, seed, use_source=True):
    """l = p_st / p_t on a seeded split, see evaluate_transfer"""
    return evaluate_transfer(source, target, w, n_labeled, seed, use_source).ratio


def _make_experience(index, seed, extractor, synth, n_labeled, u):
    pair_seed, extractor_seed, split_seed = utils.child_seeds(seed, 3)
    source, target = gen_pair(replace(synth, seed=pair_seed))
    W = factors.extract(extractor, source.features, target.features, u, extractor_seed)
    outcome = evaluate_transfer(source, target, W, n_labeled, split_seed)
    if utils.verbose:
        utils.print_with_color(_("Experience {0}: {1}, n_labeled={2}, ratio={3:.4f}").format(
            index, extractor, n_labeled, outcome.ratio), "green")
    return Experience(source, target, extractor, W, n_labeled, outcome.ratio, seed, outcome.floored)


def generate_experiences(n, extractors, synth, n_labeled_choices, seed, u=None, workers=1,
                         exponents=kernels.DEFAULT_EXPONENTS):
    """
    Record n transfer experiences

    Extractors are scheduled round-robin and labeled counts cycle through
    their choices; every experience owns a derived seed, so the store does
    not depend on the worker count.

    Args:
        n (int): Number of experiences
        extractors (list): ExtractorId tokens
        synth (SynthConfig): Template, its seed is replaced per experience
        n_labeled_choices (list): Labeled target counts
        seed (int): Parent seed
        u (int, optional): Latent dimension of the extractors, u_true by default
        workers (int): Thread pool size

    Returns:
        ExperienceStore: Experiences in index order
    """
    extractors = [factors.parse_extractor(e) for e in extractors]
    if not extractors:
        raise ValueError(_("At least one base extractor is required"))
    if not n_labeled_choices:
        raise ValueError(_("At least one labeled count is required"))
    u = synth.u_true if u is None else u
    jobs = [(index, child, extractors[index % len(extractors)], synth,
             int(n_labeled_choices[index % len(n_labeled_choices)]), u)
            for index, child in enumerate(utils.child_seeds(seed, n))]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        experiences = list(pool.map(lambda job: _make_experience(*job), jobs))
    return ExperienceStore(experiences, exponents)


def featurize_store(store, r=stats.DEFAULT_NEIGHBORS, workers=1):
    """ExperienceFeatures of every experience, in index order"""
    def featurize_one(experience):
        return stats.featurize(experience.source, experience.target, experience.w, experience.ratio, r,
                               seed=experience.seed, n_labeled=experience.n_labeled, exponents=store.exponents)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(featurize_one, store.experiences))


def subset_store(store, extractors=None, count=None):
    """
    Experiences of selected base extractors, then the first `count` of them
    """
    experiences = store.experiences
    if extractors is not None:
        wanted = {factors.parse_extractor(e) for e in extractors}
        experiences = [e for e in experiences if e.extractor in wanted]
    if count is not None:
        if count < 0:
            raise ValueError(_("Experience count must be nonnegative, got {0}").format(count))
        experiences = experiences[:count]
    return ExperienceStore(list(experiences), store.exponents)


def _evaluate_pair(pair_id, pair, seed, model, base, counts, cfg):
    source, target = pair
    split_seed, extractor_seed = utils.child_seeds(seed, 2)
    methods = [(L2T_METHOD, inference.infer_w(source, target, model, replace(cfg, seed=seed)))]
    for extractor in base:
        methods.append((str(extractor), factors.extract(extractor, source.features, target.features, cfg.u,
                                                        extractor_seed)))
    rows = []
    for n_labeled in counts:
        rows.append([ReportRow(pair_id, method, improvement_ratio(source, target, W, n_labeled, split_seed))
                     for method, W in methods])
        if utils.verbose:
            utils.print_with_color(_("Pair {0}, n_labeled={1}: {2}").format(
                pair_id, n_labeled, ", ".join("{0}={1:.4f}".format(row.method, row.ratio) for row in rows[-1])),
                "green")
    return rows


def evaluate_curve(store, model, test_pairs, base, counts, cfg, workers=1):
    """
    Improvement ratios of the inferred W and of every base extractor at several labeled counts

    Every W is computed once per pair and scored on each labeled count; all
    methods of a pair share its target split seed.

    Args:
        store (ExperienceStore, optional): Training store, checked against the model grid
        model (ReflectionModel): Trained reflection model
        test_pairs (list): (source, target) Domain pairs
        base (list): Base extractor tokens to compare with
        counts (list): Labeled target row counts
        cfg (InferConfig): Inference configuration
        workers (int): Thread pool size

    Returns:
        list: One EvaluationReport per labeled count, in the order given
    """
    if store is not None and tuple(store.exponents) != tuple(model.exponents):
        raise ValueError(_("Model bandwidth grid does not match the experience store"))
    base = [factors.parse_extractor(e) for e in base]
    counts = [int(n) for n in counts]
    seeds = utils.child_seeds(cfg.seed, len(test_pairs))
    jobs = [(pair_id, pair, seed) for pair_id, (pair, seed) in enumerate(zip(test_pairs, seeds))]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        per_pair = list(pool.map(lambda job: _evaluate_pair(*job, model, base, counts, cfg), jobs))
    return [EvaluationReport(n_labeled, [row for rows in per_pair for row in rows[index]])
            for index, n_labeled in enumerate(counts)]


def evaluate_l2t(store, model, test_pairs, base, n_labeled, cfg, workers=1):
    """
    Improvement ratios of the inferred W and of every base extractor

    All methods of a pair share its target split.

    Args:
        store (ExperienceStore, optional): Training store, checked against the model grid
        model (ReflectionModel): Trained reflection model
        test_pairs (list): (source, target) Domain pairs
        base (list): Base extractor tokens to compare with
        n_labeled (int): Labeled target rows
        cfg (InferConfig): Inference configuration
        workers (int): Thread pool size

    Returns:
        EvaluationReport: Per-pair rows and per-method means
    """
    return evaluate_curve(store, model, test_pairs, base, [n_labeled], cfg, workers)[0]


def select_gamma1(features, validation_pairs, grid, n_labeled, train_cfg=None, infer_cfg=None, correction=None):
    """
    Pick gamma1 by the mean L2T improvement ratio on validation pairs

    Ties go to the earlier grid value.

    Returns:
        tuple: (best gamma1, dict gamma1 -> mean validation ratio)
    """
    train_cfg = train_cfg or reflection.TrainConfig()
    infer_cfg = infer_cfg or inference.InferConfig()
    if not grid:
        raise ValueError(_("gamma1 grid is empty"))
    scores = {}
    best = None
    for gamma1 in grid:
        model = reflection.train_reflection(features, replace(train_cfg, gamma1=float(gamma1)), correction)
        report = evaluate_l2t(None, model, validation_pairs, [], n_labeled, infer_cfg)
        ratios = report.ratios(L2T_METHOD)
        scores[float(gamma1)] = float(np.mean(ratios)) if ratios else 0.0
        if best is None or scores[float(gamma1)] > scores[best]:
            best = float(gamma1)
    if utils.verbose:
        utils.print_with_color(_("Selected gamma1 = {0:g}").format(best), "blue")
    return best, scores
