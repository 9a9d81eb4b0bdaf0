#!/usr/bin/env python3
"""Inconsistent-system experiments: the error plateau as a function of the
sketch size (with its blow-up near s = n), and the cross-run variance bands
under sparse spiky noise.
"""

import argparse

import numpy as np

from sketchproj.bounds import horizon_fresh_gaussian
from sketchproj.harness import ExperimentConfig, build_trial_problem, run_experiment
from sketchproj.linalg import spectral_summary
from sketchproj.models import NoiseSpec
from sketchproj.sketch import SketchKind, SketchSpec
from sketchproj.solver import StopRule


def plateau_vs_block_size(args):
    sizes = [int(tok) for tok in args.sizes.split(",")]
    config = ExperimentConfig(
        model="gaussian", m=args.m, n=args.n,
        noise=NoiseSpec(kind="gaussian_relative", level=args.level, orthogonalize=True),
        methods=tuple(SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=s) for s in sizes),
        trials=args.trials,
        stop=StopRule(rel_error_threshold=1e-14, max_iterations=300),
        master_seed=args.seed, output_dir=f"{args.out}/plateau", workers=args.workers,
    )
    summary = run_experiment(config)
    ref = build_trial_problem(config, 0)
    summ = spectral_summary(ref.a)
    e_norm = float(np.linalg.norm(ref.e))
    print("--- error plateau vs block size (relative, squared)")
    for agg in summary.methods:
        tail = agg.band_mean[int(len(agg.band_mean) * 0.8):]
        bound = horizon_fresh_gaussian(summ, args.n, agg.spec.block_size, e_norm)
        guaranteed = f"{bound.horizon:.3g}" if bound.applicable else "n/a"
        print(
            f"s={agg.spec.block_size:4d} plateau={tail.mean():.4g} "
            f"horizon_bound(abs)={guaranteed}"
        )


def spiky_bands(args):
    config = ExperimentConfig(
        model="coherent", m=args.m, n=args.n,
        noise=NoiseSpec(kind="spiky", spike_count=10, spike_magnitude=25.0),
        methods=(
            SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=50),
            SketchSpec(SketchKind.BLOCK_PARTITION, block_size=50),
        ),
        trials=10,
        stop=StopRule(rel_error_threshold=1e-14, max_iterations=150),
        master_seed=args.seed, output_dir=f"{args.out}/spiky", workers=args.workers,
    )
    summary = run_experiment(config)
    print("--- spiky noise: widest cross-run band of the relative error")
    for agg in summary.methods:
        print(f"{agg.label:26s} max_band_width={agg.max_band_width:.4g}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=2000)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--sizes", default="10,50,100,150,199")
    ap.add_argument("--level", type=float, default=0.2)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--seed", type=int, default=99)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--out", default="runs/noise")
    args = ap.parse_args()
    plateau_vs_block_size(args)
    spiky_bands(args)


if __name__ == "__main__":
    main()
