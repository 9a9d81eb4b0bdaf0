#!/usr/bin/env python3
"""Block-size sweep on the Gaussian and coherent models.

Writes per-size trace/band CSVs plus sweep.csv (size vs mean iterations and
seconds to the 1e-4 threshold) under --out.
"""

import argparse

from sketchproj.harness import ExperimentConfig, block_size_sweep
from sketchproj.sketch import SketchKind, SketchSpec
from sketchproj.solver import StopRule


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=2000)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--sizes", default="5,25,50,100")
    ap.add_argument("--model", default="gaussian", choices=["gaussian", "coherent", "mixed"])
    ap.add_argument("--trials", type=int, default=35)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--out", default="runs/block_size_sweep")
    args = ap.parse_args()

    config = ExperimentConfig(
        model=args.model,
        m=args.m,
        n=args.n,
        methods=(SketchSpec(SketchKind.GAUSSIAN_BLOCK, block_size=5),),
        trials=args.trials,
        stop=StopRule(rel_error_threshold=1e-4, max_iterations=200_000),
        master_seed=args.seed,
        output_dir=f"{args.out}/{args.model}",
        workers=args.workers,
    )
    sizes = [int(tok) for tok in args.sizes.split(",")]
    for s, summary in block_size_sweep(config, sizes):
        agg = summary.methods[0]
        print(f"s={s:4d}  mean_iters={agg.mean_iters:8.1f}  mean_seconds={agg.mean_seconds:.4g}")


if __name__ == "__main__":
    main()
