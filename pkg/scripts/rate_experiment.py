"""Mean residual against the theoretical bound in both error regimes.

Writes one CSV per case to ``--out`` with columns ``k,A,mean_residual,bound``
and prints the worst ratio of residual to bound.

    python3 scripts/rate_experiment.py --seeds 50 --iters 1000 --out results/rates
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from simtri.oracles import OracleConfig, calibrate, setup_for
from simtri.rstm import RunConfig, theoretical_bound
from simtri.verify import mean_residuals, separable_instance, simplex_instance


def cases(args):
    sep = separable_instance(10, seed=81)
    yield "controlled_coord_separable", "controlled", 0.0, [
        RunConfig(sep, OracleConfig("coord"), iters=args.iters, seed=s) for s in range(args.seeds)]
    simplex = simplex_instance(5, 3, seed=82)
    yield "controlled_block_simplex", "controlled", 0.0, [
        RunConfig(simplex, OracleConfig("block", noise="uniform"), iters=args.iters, seed=s, regime="controlled")
        for s in range(args.seeds)]
    sep2 = separable_instance(10, seed=83)
    structure = setup_for(sep2, "coord").structure
    for delta in args.deltas:
        level = calibrate("coord", delta, structure)
        yield f"uncontrolled_coord_delta={delta:g}", "uncontrolled", delta, [
            RunConfig(sep2, OracleConfig("coord", level=level, noise="adversarial"), iters=args.iters, seed=s)
            for s in range(args.seeds)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--iters", type=int, default=1000)
    ap.add_argument("--deltas", type=float, nargs="+", default=[1e-2, 1e-3, 1e-4])
    ap.add_argument("--out", type=Path, default=Path("results/rates"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, regime, delta, cfgs in cases(args):
        mean, traces = mean_residuals(cfgs)
        t0 = traces[0]
        bound = np.array([theoretical_bound(k, A, t0.P0, t0.rho, delta, regime) for k, A in zip(t0.k, t0.A)])
        with open(args.out / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "A", "mean_residual", "bound"])
            w.writerows(zip(t0.k, map(repr, t0.A), map(repr, mean.tolist()), map(repr, bound.tolist())))
        print(f"{name:36s} final={mean[-1]:.3e} worst residual/bound={np.max(mean[1:] / bound[1:]):.3f}")


if __name__ == "__main__":
    main()
