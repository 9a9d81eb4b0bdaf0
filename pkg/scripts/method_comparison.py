#!/usr/bin/env python3
"""Gaussian sketching versus plain row/block selection, per iteration.

Covers the three comparisons of interest: block methods at a shared block
size, single-row methods on the coherent model (where the Gaussian variant
wins per iteration), and the mixed model (where it wins outright).
"""

import argparse

from sketchproj.harness import ExperimentConfig, run_experiment
from sketchproj.sketch import SketchKind, SketchSpec
from sketchproj.solver import StopRule


def run(tag, config):
    summary = run_experiment(config)
    print(f"--- {tag}")
    for agg in summary.methods:
        print(
            f"{agg.label:34s} reached={agg.reached}/{len(agg.final_rel_errors)} "
            f"mean_iters={agg.mean_iters:8.1f} final={agg.final_rel_error_mean:.3g}"
        )


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=2000)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--s", type=int, default=50)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--out", default="runs/method_comparison")
    args = ap.parse_args()

    block_pair = (
        SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=args.s),
        SketchSpec(SketchKind.BLOCK_PARTITION, block_size=args.s),
    )
    single_pair = (
        SketchSpec(SketchKind.GAUSSIAN_VECTOR),
        SketchSpec(SketchKind.SINGLE_ROW_WEIGHTED),
    )
    run("block methods, gaussian model", ExperimentConfig(
        model="gaussian", m=args.m, n=args.n, methods=block_pair, trials=args.trials,
        stop=StopRule(rel_error_threshold=1e-4, max_iterations=50_000),
        master_seed=args.seed, output_dir=f"{args.out}/blocks_gaussian", workers=args.workers,
    ))
    run("single-row methods, coherent model", ExperimentConfig(
        model="coherent", m=args.m, n=args.n, methods=single_pair, trials=args.trials,
        stop=StopRule(rel_error_threshold=1e-2, max_iterations=20_000),
        master_seed=args.seed, output_dir=f"{args.out}/single_coherent", workers=args.workers,
        record_stride=10,
    ))
    run("block methods, mixed model", ExperimentConfig(
        model="mixed", m=args.m, n=args.n, methods=block_pair, trials=args.trials,
        stop=StopRule(rel_error_threshold=1e-4, max_iterations=6000),
        master_seed=args.seed, output_dir=f"{args.out}/blocks_mixed", workers=args.workers,
        record_stride=10,
    ))


if __name__ == "__main__":
    main()
