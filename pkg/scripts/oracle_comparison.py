"""Every oracle variant on one unconstrained separable quadratic.

Reports the mean final residual and the first iteration whose mean residual
drops below ``--target``. Derivative-free variants use the optimal step for
the given noise level.

    python3 scripts/oracle_comparison.py --n 20 --seeds 20 --iters 2000
"""
import argparse

import numpy as np

from simtri.oracles import VARIANTS, OracleConfig
from simtri.problems import make_separable_quadratic
from simtri.rstm import RunConfig
from simtri.verify import mean_residuals


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--noise-level", type=float, default=1e-10)
    ap.add_argument("--target", type=float, default=1e-4)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    # direction oracles need an unconstrained space
    prob = make_separable_quadratic(rng.uniform(1, 10, args.n), rng.standard_normal(args.n))
    print(f"{'variant':15s} {'final residual':>15s} {'k to target':>12s}")
    for variant in VARIANTS:
        df = variant.startswith("df_")
        oracle = OracleConfig(variant, level=args.noise_level if df else 0.0, noise="uniform" if df else "none",
                              tau="optimal" if df else None)
        mean, _ = mean_residuals(RunConfig(prob, oracle, iters=args.iters, seed=s) for s in range(args.seeds))
        hit = np.flatnonzero(mean <= args.target)
        print(f"{variant:15s} {mean[-1]:15.3e} {hit[0] if hit.size else '-':>12}")


if __name__ == "__main__":
    main()
