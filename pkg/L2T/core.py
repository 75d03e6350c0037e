#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# (C)2025 L2T-Reflect contributors

"""
Command line interface: experience generation, featurization, training,
inference, evaluation and the gradient self-check.
"""

import sys
import argparse
import traceback

import L2T.utils as utils
import L2T.stats as stats
import L2T.kernels as kernels
import L2T.storage as storage
import L2T.factors as factors
import L2T.pipeline as pipeline
import L2T.inference as inference
import L2T.reflection as reflection
import L2T.miscellaneous as miscellaneous

_ = miscellaneous.i18n

application_name = 'L2T-Reflect'
application_version = miscellaneous.__version__

#: Maximum relative gradient error accepted by grad-check
GRAD_CHECK_TOLERANCE = 1e-4

debug = False


def _add_synth_arguments(parser):
    parser.add_argument("--n", type=int, required=True, help=_("Number of items to generate"))
    parser.add_argument("--out", required=True, help=_("Output directory"))
    parser.add_argument("--seed", type=int, default=0, help=_("Parent seed (default: 0)"))
    parser.add_argument("--m", type=int, default=50, help=_("Ambient feature dimension (default: 50)"))
    parser.add_argument("--u-true", type=int, default=10, help=_("Latent dimension of the generator (default: 10)"))
    defaults = pipeline.SynthConfig()
    parser.add_argument("--relatedness", type=float, default=defaults.relatedness,
                        help=_("Fraction of shared latent structure in [0, 1] (default: {0:g})").format(defaults.relatedness))
    parser.add_argument("--noise", type=float, default=defaults.noise_sigma,
                        help=_("Ambient noise sigma (default: {0:g})").format(defaults.noise_sigma))
    parser.add_argument("--class-spread", type=float, default=defaults.class_spread,
                        help=_("Scale of the latent class means (default: {0:g})").format(defaults.class_spread))
    parser.add_argument("--classes", type=int, default=3, help=_("Classes per domain (default: 3)"))
    parser.add_argument("--samples-per-class", type=int, default=20, help=_("Rows per class (default: 20)"))


def _add_infer_arguments(parser, u_default):
    parser.add_argument("--u", type=int, default=u_default, help=_("Latent dimension of W (default: {0})").format(u_default))
    parser.add_argument("--gamma2", type=float, default=1e-3, help=_("Frobenius penalty on W (default: 1e-3)"))
    parser.add_argument("--r", type=int, default=stats.DEFAULT_NEIGHBORS,
                        help=_("Neighbor count of the discriminant criterion (default: {0})").format(stats.DEFAULT_NEIGHBORS))
    parser.add_argument("--seed", type=int, default=0, help=_("Seed (default: 0)"))
    parser.add_argument("--max-iters", type=int, default=100, help=_("Conjugate gradient iterations (default: 100)"))
    parser.add_argument("--restarts", type=int, default=3, help=_("Starting points (default: 3)"))
    parser.add_argument("--free", action="store_true",
                        help=_("Optimize W without keeping its columns orthonormal"))


def create_parser():
    """
    Create and return the argument parser

    Returns:
        argparse.ArgumentParser: The configured argument parser
    """
    parser = argparse.ArgumentParser(prog="l2t", description=_("Learn to transfer from recorded transfer experiences"))
    parser.add_argument("--verbose", "-v", action="store_true", help=_("Enable verbose output"))
    parser.add_argument("--no-color", "-n", action="store_true", help=_("Disable colored output"))
    parser.add_argument("--debug", action="store_true", help=_("Print tracebacks on errors"))
    parser.add_argument("--version", "-V", action="version", version=application_name + " " + application_version)
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    gen = commands.add_parser("gen", help=_("Generate a store of transfer experiences"))
    _add_synth_arguments(gen)
    gen.add_argument("--extractors", default=",".join(e.value for e in factors.ALL_EXTRACTORS),
                     help=_("Comma separated base extractors (default: all)"))
    gen.add_argument("--n-labeled", default="3,15", help=_("Comma separated labeled target counts (default: 3,15)"))
    gen.add_argument("--u", type=int, help=_("Latent dimension of the extractors (default: --u-true)"))
    gen.add_argument("--workers", type=int, default=1, help=_("Worker threads (default: 1)"))
    gen.add_argument("--exponent-low", type=float, default=kernels.DEFAULT_LOW_EXPONENT,
                     help=_("First bandwidth exponent (default: {0:g})").format(kernels.DEFAULT_LOW_EXPONENT))
    gen.add_argument("--exponent-high", type=float, default=kernels.DEFAULT_HIGH_EXPONENT,
                     help=_("Last bandwidth exponent (default: {0:g})").format(kernels.DEFAULT_HIGH_EXPONENT))
    gen.add_argument("--exponent-step", type=float, default=kernels.DEFAULT_EXPONENT_STEP,
                     help=_("Bandwidth exponent increment (default: {0:g})").format(kernels.DEFAULT_EXPONENT_STEP))

    pairs = commands.add_parser("pairs", help=_("Generate held-out domain pairs"))
    _add_synth_arguments(pairs)

    featurize = commands.add_parser("featurize", help=_("Compute experience features"))
    featurize.add_argument("--store", required=True, help=_("Experience store directory"))
    featurize.add_argument("--out", required=True, help=_("Output feature directory"))
    featurize.add_argument("--r", type=int, default=stats.DEFAULT_NEIGHBORS,
                           help=_("Neighbor count (default: {0})").format(stats.DEFAULT_NEIGHBORS))
    featurize.add_argument("--correct", action="store_true", help=_("Enable the labeled-count ratio correction"))
    featurize.add_argument("--p", type=int, default=1, help=_("Smallest labeled count of the correction, at most --q"))
    featurize.add_argument("--q", type=int, default=1, help=_("Largest labeled count of the correction"))
    featurize.add_argument("--workers", type=int, default=1, help=_("Worker threads (default: 1)"))

    train = commands.add_parser("train", help=_("Train the reflection function"))
    train.add_argument("--features", required=True, help=_("Feature directory"))
    train.add_argument("--out", required=True, help=_("Output model directory"))
    train.add_argument("--gamma1", type=float, default=1e-3, help=_("Parameter penalty (default: 1e-3)"))
    train.add_argument("--huber-delta", type=float, default=1.0, help=_("Huber transition point (default: 1.0)"))
    train.add_argument("--restarts", type=int, default=5, help=_("Starting points (default: 5)"))
    train.add_argument("--seed", type=int, default=0, help=_("Seed (default: 0)"))
    train.add_argument("--max-iters", type=int, default=2000, help=_("Iterations per start (default: 2000)"))
    train.add_argument("--components", default=",".join(reflection.COMPONENTS),
                       help=_("Comma separated reflection components (default: all)"))

    infer = commands.add_parser("infer", help=_("Infer W for a domain pair"))
    infer.add_argument("--model", required=True, help=_("Model directory"))
    infer.add_argument("--pair", required=True, help=_("Domain pair directory"))
    infer.add_argument("--out", required=True, help=_("Output matrix file"))
    _add_infer_arguments(infer, 10)

    evaluate = commands.add_parser("eval", help=_("Compare L2T against the base extractors"))
    evaluate.add_argument("--model", required=True, help=_("Model directory"))
    evaluate.add_argument("--test-pairs", required=True, help=_("Pair collection directory"))
    evaluate.add_argument("--n-labeled", type=int, required=True, help=_("Labeled target rows"))
    evaluate.add_argument("--report", required=True, help=_("Output report file"))
    evaluate.add_argument("--store", help=_("Training store, checked against the model grid"))
    evaluate.add_argument("--extractors", default=",".join(e.value for e in factors.ALL_EXTRACTORS),
                          help=_("Comma separated base extractors (default: all)"))
    evaluate.add_argument("--workers", type=int, default=1, help=_("Worker threads (default: 1)"))
    _add_infer_arguments(evaluate, 10)

    grad_check = commands.add_parser("grad-check", help=_("Compare the analytic W gradient with finite differences"))
    grad_check.add_argument("--seed", type=int, default=0, help=_("Seed (default: 0)"))
    grad_check.add_argument("--trials", type=int, default=20, help=_("Random instances (default: 20)"))

    return parser


def setup_arguments(argv=None):
    """
    Set up and parse command line arguments

    Returns:
        argparse.Namespace: Parsed command line arguments
    """
    parser = create_parser()
    args = parser.parse_args(argv)
    for name in ("n", "trials"):
        if getattr(args, name, 0) is not None and getattr(args, name, 0) < 0:
            parser.error(_("--{0} must be nonnegative").format(name))
    if args.command == "featurize" and args.correct and args.p > args.q:
        parser.error(_("--correct requires --p not larger than --q"))
    return args


def _synth_config(args):
    return pipeline.SynthConfig(
        m=args.m,
        u_true=args.u_true,
        classes_per_domain=args.classes,
        samples_per_class=args.samples_per_class,
        relatedness=args.relatedness,
        noise_sigma=args.noise,
        class_spread=args.class_spread,
        seed=args.seed,
    )


def _infer_config(args):
    return inference.InferConfig(gamma2=args.gamma2, u=args.u, r=args.r, max_iters=args.max_iters,
                                 restarts=args.restarts, seed=args.seed,
                                 orthonormal=not args.free)


def command_gen(args):
    store = pipeline.generate_experiences(
        args.n,
        utils.parse_csv(args.extractors, factors.parse_extractor),
        _synth_config(args),
        utils.parse_csv(args.n_labeled, int),
        args.seed,
        u=args.u,
        workers=args.workers,
        exponents=kernels.exponent_grid(args.exponent_low, args.exponent_high, args.exponent_step),
    )
    storage.save_store(store, args.out)
    utils.print_with_color(_("Wrote {0} experiences to {1}").format(store.count, args.out), "green")
    return 0


def command_pairs(args):
    pairs = pipeline.generate_pairs(args.n, _synth_config(args), args.seed)
    storage.save_pairs(pairs, args.out)
    utils.print_with_color(_("Wrote {0} domain pairs to {1}").format(len(pairs), args.out), "green")
    return 0


def command_featurize(args):
    store = storage.load_store(args.store)
    correction = reflection.CorrectionConfig(p=args.p, q=args.q, enabled=args.correct)
    features = pipeline.featurize_store(store, args.r, workers=args.workers)
    storage.save_features(features, args.out, r=args.r, correction=correction)
    utils.print_with_color(_("Wrote features of {0} experiences to {1}").format(len(features), args.out), "green")
    return 0


def command_train(args):
    features, correction = storage.load_features(args.features)
    cfg = reflection.TrainConfig(gamma1=args.gamma1, huber_delta=args.huber_delta, restarts=args.restarts,
                                 max_iters=args.max_iters, seed=args.seed, components=args.components)
    result, b_corr = reflection.fit_correction(features, cfg, correction)
    storage.save_model(result.model, args.out)
    utils.print_with_color(_("Trained on {0} experiences, objective {1:.6g}, b_corr {2:g}").format(
        len(features), result.objective, b_corr), "green")
    return 0


def command_infer(args):
    model = storage.load_model(args.model)
    source, target = storage.load_pair(args.pair)
    result = inference.run_inference(source, target, model, _infer_config(args))
    storage.write_matrix(args.out, result.w.entries)
    utils.print_with_color(_("Inferred {0}x{1} W, objective {2:.6g}").format(
        result.w.m, result.w.u, result.objective), "green")
    return 0


def command_eval(args):
    model = storage.load_model(args.model)
    pairs = storage.load_pairs(args.test_pairs)
    store = storage.load_store(args.store) if args.store else None
    report = pipeline.evaluate_l2t(store, model, pairs, utils.parse_csv(args.extractors), args.n_labeled,
                                   _infer_config(args), workers=args.workers)
    storage.write_report(report, args.report)
    for method, mean in report.means().items():
        utils.print_with_color("{0:<14} {1:.4f}".format(method, mean), "blue")
    return 0


def command_grad_check(args):
    worst = 0.0
    for seed in utils.child_seeds(args.seed, args.trials):
        W, source, target, model, cfg = inference.random_gradient_instance(seed)
        error = inference.finite_diff_check(W, source, target, model, cfg)
        if utils.verbose:
            utils.print_with_color(_("Instance {0}: max relative error {1:.3e}").format(seed, error), "blue")
        worst = max(worst, error)
    print("{0:.6e}".format(worst))
    if worst > GRAD_CHECK_TOLERANCE:
        utils.print_with_color(_("Gradient check failed: {0:.3e} > {1:g}").format(worst, GRAD_CHECK_TOLERANCE), "red")
        return 1
    return 0


COMMANDS = {
    "gen": command_gen,
    "pairs": command_pairs,
    "featurize": command_featurize,
    "train": command_train,
    "infer": command_infer,
    "eval": command_eval,
    "grad-check": command_grad_check,
}


def run(argv=None):
    global debug

    args = setup_arguments(argv)
    utils.verbose = args.verbose
    if args.no_color:
        utils.no_color = True
    debug = args.debug

    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        print("\nOperation cancelled by user.")
        return 1
    except Exception as error:
        utils.print_with_color(f"Error: {str(error)}", "red")
        if debug:
            traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(run())
