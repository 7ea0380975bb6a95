"""Residual decay on the chain quadratic, deterministic and randomized.

Fits the log-log slope over a window of ``k`` (``k/n`` for the randomized
block method) and writes the residual curves to ``--out``.

    python3 scripts/acceleration.py --p 2048 --blocks 4 --seeds 50
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from simtri.oracles import OracleConfig
from simtri.problems import make_chain_quadratic
from simtri.rstm import RunConfig, solve
from simtri.verify import loglog_slope, mean_residuals


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=2048)
    ap.add_argument("--blocks", type=int, default=4)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--window", type=int, nargs=2, default=[100, 1000])
    ap.add_argument("--out", type=Path, default=Path("results/acceleration"))
    args = ap.parse_args()
    lo, hi = args.window
    n = args.blocks
    prob = make_chain_quadratic(args.p, (args.p // n,) * n)
    det = solve(RunConfig(prob, OracleConfig("full"), iters=hi)).residuals()
    rnd, _ = mean_residuals(RunConfig(prob, OracleConfig("block"), iters=hi * n, seed=s) for s in range(args.seeds))
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "residuals.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "deterministic", "randomized_mean"])
        for e in range(hi + 1):
            w.writerow([e, repr(float(det[e])), repr(float(rnd[e * n]))])
    k = np.arange(lo, hi + 1)
    kk = np.arange(lo * n, hi * n + 1)
    print(f"deterministic slope over k in [{lo}, {hi}]:   {loglog_slope(k, det[lo:hi + 1]):.3f}")
    print(f"randomized slope over k/n in [{lo}, {hi}]:    {loglog_slope(kk / n, rnd[lo * n:hi * n + 1]):.3f}")


if __name__ == "__main__":
    main()
