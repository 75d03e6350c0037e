#!/usr/bin/env python3
"""
Full-scale check of the L2T improvement curve on synthetic data.

Trains a reflection model on a large experience store, then scores the
inferred W against every base extractor at 3 and 15 labeled target rows.
Passes when L2T is within a tolerance of the best base method on the first
replication and its mean ratio does not grow from 3 to 15 labels on most
replications.
"""

import os
import sys
import argparse

# Add project root to path for importing L2T modules
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import L2T.utils as utils
import L2T.factors as factors
import L2T.pipeline as pipeline
import L2T.inference as inference
import L2T.reflection as reflection

COUNTS = [3, 15]


def create_parser():
    parser = argparse.ArgumentParser(description="Check the L2T improvement curve against the base extractors")
    parser.add_argument("--experiences", type=int, default=200)
    parser.add_argument("--pairs", type=int, default=20, help="Test pairs per replication")
    parser.add_argument("--replications", type=int, default=20)
    parser.add_argument("--tolerance", type=float, default=0.01)
    parser.add_argument("--required", type=int, default=15,
                        help="Replications whose L2T curve must not increase")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--verbose", "-v", action="store_true")
    return parser


def l2t_gap(report):
    """L2T mean ratio minus the best base mean ratio"""
    means = report.means()
    best = max(ratio for method, ratio in means.items() if method != pipeline.L2T_METHOD)
    return means[pipeline.L2T_METHOD] - best


def main():
    args = create_parser().parse_args()
    utils.verbose = args.verbose
    synth = pipeline.SynthConfig(m=50, u_true=10)
    cfg = inference.InferConfig(u=10)

    utils.print_with_color("Generating {0} experiences".format(args.experiences), "blue")
    store = pipeline.generate_experiences(args.experiences, factors.ALL_EXTRACTORS, synth, COUNTS,
                                          seed=args.seed, workers=args.workers)
    features = pipeline.featurize_store(store, workers=args.workers)
    model = reflection.train_reflection(features)

    non_increasing = 0
    first_gaps = None
    for replication in range(args.replications):
        pairs = pipeline.generate_pairs(args.pairs, synth, seed=args.seed + 1 + replication)
        reports = pipeline.evaluate_curve(store, model, pairs, factors.ALL_EXTRACTORS, COUNTS, cfg,
                                          workers=args.workers)
        curve = [report.means()[pipeline.L2T_METHOD] for report in reports]
        if curve[0] >= curve[-1]:
            non_increasing += 1
        if first_gaps is None:
            first_gaps = [l2t_gap(report) for report in reports]
        print("Replication {0}: L2T {1}".format(
            replication, ", ".join("n={0} {1:.4f}".format(n, mean) for n, mean in zip(COUNTS, curve))))

    ok = True
    for n_labeled, gap in zip(COUNTS, first_gaps):
        if gap < -args.tolerance:
            utils.print_with_color("n={0}: L2T trails the best base method by {1:.4f}".format(n_labeled, -gap),
                                   "red")
            ok = False
    if non_increasing < args.required:
        utils.print_with_color("L2T curve non-increasing in only {0} of {1} replications".format(
            non_increasing, args.replications), "red")
        ok = False

    if ok:
        utils.print_with_color("Transfer curve check passed ({0} of {1} replications non-increasing)".format(
            non_increasing, args.replications), "green")
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
