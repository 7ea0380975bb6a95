"""Verification suites: each check measures one quantity and compares it with its bound.

The CLI runs these with default sizes; the acceptance tests call the same
functions with the sizes and tolerances they pin.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .block_space import BlockPoint, pairing, primal_norm
from .oracles import (
    ENUMERABLE,
    OracleConfig,
    VARIANTS,
    bias_bound,
    calibrate,
    draw,
    setup_for,
    sphere_second_moment,
    verify_unbiased,
)
from .problems import (
    Problem,
    audit_block_lipschitz,
    audit_smoothness,
    make_chain_quadratic,
    make_coupled_quadratic,
    make_separable_quadratic,
    make_simplex_quadratic,
)
from .prox import BlockSet, ProxSetup, block_bregman, block_prox, bregman, is_feasible, make_setup, prox_map, prox_regularity_check
from .rstm import (
    RunConfig,
    coefficients,
    gamma_rows,
    coefficient_bounds,
    solve,
    theoretical_bound,
)


@dataclass(frozen=True)
class ClaimResult:
    name: str
    measured: float
    bound: float
    passed: bool

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: measured={self.measured:.6g} bound={self.bound:.6g}"


def _claim(name: str, measured: float, bound: float) -> ClaimResult:
    return ClaimResult(name, float(measured), float(bound), bool(measured <= bound))


# ---------------------------------------------------------------- instances


def random_spd(p: int, rng: np.random.Generator, low: float = 0.5, high: float = 2.0) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    return q @ np.diag(np.linspace(low, high, p)) @ q.T


def coupled_instance(dims, seed: int = 0, scale_b: float = 1.0) -> Problem:
    rng = np.random.default_rng(seed)
    p = sum(dims)
    return make_coupled_quadratic(random_spd(p, rng), scale_b * rng.standard_normal(p), dims)


def simplex_instance(n_blocks: int = 5, dim: int = 3, seed: int = 0) -> Problem:
    """``1/2 ||M x - M x_t||^2`` with an interior target, so ``f* = 0``."""
    rng = np.random.default_rng(seed)
    p = n_blocks * dim
    M = rng.standard_normal((p + 5, p))
    target = np.concatenate([rng.dirichlet(2.0 * np.ones(dim)) for _ in range(n_blocks)])
    return make_simplex_quadratic(M, M @ target, (dim,) * n_blocks)


def box_instance(n: int = 6, seed: int = 0) -> Problem:
    """Separable quadratic on ``[0, 1]^n`` whose centre lies partly outside the box."""
    rng = np.random.default_rng(seed)
    return make_separable_quadratic(rng.uniform(1, 5, n), rng.uniform(-1, 2, n), lower=0.0, upper=1.0)


def mixed_instance(seed: int = 0) -> tuple[Problem, ProxSetup]:
    """Coupled quadratic with a free block of size 3 and an interval block of size 2."""
    rng = np.random.default_rng(seed)
    A = random_spd(5, rng)
    sets = [BlockSet("free"), BlockSet.box(-np.ones(2), np.ones(2))]
    prob = make_coupled_quadratic(A, 0.3 * rng.standard_normal(5), (3, 2), sets=sets)
    return prob, prob.setup()


def matrix_setup(prob: Problem, rng: np.random.Generator) -> ProxSetup:
    sets = [BlockSet("matrix", matrix=random_spd(d, rng)) for d in prob.dims]
    return make_setup(sets, prob.dims, prob.lipschitz)


def random_point(setup: ProxSetup, rng: np.random.Generator, scale: float = 1.0) -> BlockPoint:
    """Random point of ``Q^0``."""
    blocks = []
    for d, bs in zip(setup.structure.dims, setup.sets):
        if bs.kind == "simplex":
            blocks.append(rng.dirichlet(np.ones(d)))
        elif bs.kind == "box":
            lo, hi = bs.bounds(d)
            lo = np.where(np.isfinite(lo), lo, -scale)
            hi = np.where(np.isfinite(hi), hi, scale)
            blocks.append(rng.uniform(lo, hi))
        else:
            blocks.append(scale * rng.standard_normal(d))
    return BlockPoint.from_blocks(setup.structure, blocks)


def oracle_cases(tau: float | str | None = 1e-6):
    """``(name, problem, setup, variant)`` covering every variant and every
    compatible prox setup."""
    cases = []
    scalar = coupled_instance((1,) * 5, seed=1, scale_b=0.3)
    blocks = coupled_instance((2, 2, 1), seed=2, scale_b=0.3)
    simplex = simplex_instance(3, 3, seed=3)
    box = box_instance(5, seed=4)
    mixed, mixed_setup = mixed_instance(seed=5)
    boxed_blocks = make_separable_quadratic([1.5, 3.0], np.array([0.2, -0.4, 0.9, 1.5, 0.1]), dims=(2, 3),
                                            lower=-1.0, upper=1.0)
    for v in ("dir", "df_dir"):
        cases.append((f"{v}/free", scalar, setup_for(scalar, v), v))
    for v in ("coord", "df_coord"):
        cases.append((f"{v}/free", scalar, setup_for(scalar, v), v))
        cases.append((f"{v}/box", box, setup_for(box, v), v))
    for v in ("block", "df_block"):
        cases.append((f"{v}/free", blocks, setup_for(blocks, v), v))
        cases.append((f"{v}/simplex", simplex, setup_for(simplex, v), v))
    cases.append(("block/matrix", blocks, matrix_setup(blocks, np.random.default_rng(6)), "block"))
    for v in ("block_rand", "df_block_rand"):
        cases.append((f"{v}/mixed", mixed, mixed_setup, v))
        cases.append((f"{v}/box", boxed_blocks, setup_for(boxed_blocks, v), v))
    cases.append(("full/free", blocks, setup_for(blocks, "full"), "full"))
    cases.append(("full/simplex", simplex, setup_for(simplex, "full"), "full"))
    return cases


def _config(variant: str, level: float = 0.0, noise: str = "none", tau=1e-6, seed: int = 0) -> OracleConfig:
    df = variant.startswith("df_")
    return OracleConfig(variant, level=level, noise=noise, tau=tau if df else None, seed=seed)


# ---------------------------------------------------------------- coefficients and gamma


def check_coefficients(rhos: Iterable[float] = (1, 1.5, 2, 10, 100), K: int = 10_000) -> list[ClaimResult]:
    out = []
    for rho in rhos:
        alpha, A = coefficients(K, rho)
        k = np.arange(1, K + 1)
        lo, hi = coefficient_bounds(k, rho)
        below = np.max((lo - A[1:]) / A[1:])
        above = np.max((A[1:] - hi) / hi)
        out.append(_claim(f"A_k sandwich rho={rho:g}", max(below, above, 0.0), 1e-12))
        eq = np.max(np.abs(A[1:] - rho * rho * alpha[1:] ** 2) / A[1:])
        out.append(_claim(f"A_k+1 = rho^2 alpha_k+1^2 rho={rho:g}", eq, 1e-12))
        ratio = alpha[1:] / A[1:]
        growth = max(float(np.max(np.diff(ratio))) if K > 1 else 0.0, float(ratio.max() - 1.0 / rho), 0.0)
        out.append(_claim(f"alpha_k/A_k non-increasing and <= 1/rho, rho={rho:g}", growth, 1e-15))
    return out


def check_gamma(rhos: Iterable[float] = (2, 10), K: int = 1000) -> list[ClaimResult]:
    out = []
    for rho in rhos:
        worst_neg, worst_sum = 0.0, 0.0
        for table in gamma_rows(K, rho):
            worst_neg = max(worst_neg, -float(table.coefficients.min()))
            worst_sum = max(worst_sum, abs(table.total - 1.0))
        out.append(_claim(f"gamma >= 0, rho={rho:g}", worst_neg, 1e-12))
        out.append(_claim(f"sum gamma = 1, rho={rho:g}", worst_sum, 1e-10))
    return out


@functools.lru_cache(maxsize=32)
def _feasibility_layout(setup: ProxSetup):
    s = setup.structure
    lo, hi = np.full(s.p, -np.inf), np.full(s.p, np.inf)
    simplex = []
    for i, bs in enumerate(setup.sets):
        sl = s.span(i)
        if bs.kind == "box":
            lo[sl], hi[sl] = bs.bounds(sl.stop - sl.start)
        elif bs.kind == "simplex":
            simplex.append(np.arange(sl.start, sl.stop))
    idx = np.concatenate(simplex) if simplex else np.zeros(0, dtype=int)
    starts = np.cumsum([0] + [len(b) for b in simplex[:-1]]) if simplex else np.zeros(0, dtype=int)
    return lo, hi, idx, starts


def feasibility_violation(setup: ProxSetup, x: BlockPoint) -> float:
    lo, hi, idx, starts = _feasibility_layout(setup)
    v = x.data
    worst = max(float(np.max(lo - v)), float(np.max(v - hi)), 0.0)
    if idx.size:
        w = v[idx]
        worst = max(worst, float(-w.min()), float(np.max(np.abs(np.add.reduceat(w, starts) - 1.0))))
    return worst


def check_feasibility(iters: int = 1000, seeds: int = 3) -> list[ClaimResult]:
    """All of ``x_k, y_k, u_k`` stay in ``Q`` on interval and simplex problems."""
    runs = [
        ("coord/box", box_instance(6, seed=11), "coord"),
        ("df_coord/box", box_instance(6, seed=12), "df_coord"),
        ("block/simplex", simplex_instance(4, 3, seed=13), "block"),
        ("df_block/simplex", simplex_instance(4, 3, seed=14), "df_block"),
        ("full/simplex", simplex_instance(3, 4, seed=15), "full"),
    ]
    out = []
    for name, prob, variant in runs:
        worst = 0.0
        for seed in range(seeds):
            cfg = RunConfig(prob, _config(variant, tau=1e-7), iters=iters, seed=seed)

            def cb(state, sample, setup=cfg.setup):
                nonlocal worst
                for pt in (state.x, state.y, state.u):
                    worst = max(worst, feasibility_violation(setup, pt))

            solve(cfg, callback=cb)
        out.append(_claim(f"iterates feasible {name}", worst, 1e-10))
    return out


# ---------------------------------------------------------------- oracles


def check_unbiased(n_samples: int = 100_000, tau: float = 1e-6) -> list[ClaimResult]:
    out = []
    rng = np.random.default_rng(21)
    for name, prob, setup, variant in oracle_cases():
        x = random_point(setup, rng, scale=0.5)
        cfg = _config(variant, tau=tau, seed=22)
        rep = verify_unbiased(cfg, prob, setup, x, n_samples, np.random.default_rng(23))
        kind = "exact" if rep.exact else f"monte carlo N={rep.samples}"
        out.append(_claim(f"unbiased {name} ({kind})", rep.mean_error, rep.stat_bound))
    for dim in (3, 5):
        z, bound = sphere_second_moment(dim, n_samples, np.random.default_rng(24 + dim))
        out.append(_claim(f"sphere E[ee^T] = I/{dim} (max z-score)", z, bound))
    return out


def check_bias_bounds(samples: int = 10_000, levels: Iterable[float] = (1e-4, 1e-6), slack: float = 1e-12) -> list[ClaimResult]:
    """Every sample's ``||R_b xi||_{E,*}`` is within the variant's bias bound.

    Noise models cycle through ``none``, ``uniform`` and ``adversarial``.
    """
    out = []
    noises = ("none", "uniform", "adversarial")
    rng = np.random.default_rng(31)
    for name, prob, setup, variant in oracle_cases():
        for level in levels:
            worst = -math.inf
            cfgs = [_config(variant, level, noise, tau="optimal", seed=32) for noise in noises]
            bound = bias_bound(cfgs[0], setup.structure).delta
            pts = [random_point(setup, rng, scale=0.3) for _ in range(16)]
            for t in range(samples):
                smp = draw(prob, setup, pts[t % 16], cfgs[t % 3], rng)
                worst = max(worst, smp.bias_norm() - bound)
            out.append(_claim(f"bias <= delta {name} Delta={level:g} (excess over {bound:.3g})", worst, slack))
    return out


# ---------------------------------------------------------------- prox


def check_prox_regularity(triples: int = 1000, tol: float = 1e-9) -> list[ClaimResult]:
    cases = oracle_cases()
    rng = np.random.default_rng(41)
    worst = {name: 0.0 for name, *_ in cases}
    for t in range(triples):
        name, prob, setup, variant = cases[t % len(cases)]
        y = random_point(setup, rng)
        u = random_point(setup, rng)
        alpha = float(rng.uniform(0.05, 3.0))
        cfg = _config(variant, level=float(rng.choice([0.0, 1e-3])), noise="uniform", tau=1e-4)
        smp = draw(prob, setup, y, cfg, rng)
        gap = prox_regularity_check(setup, prob, y, u, alpha, smp)
        step = u - prox_map(setup, u, alpha, smp.ghat)
        scale = 1.0 + abs(pairing(prob.grad(y), step))
        worst[name] = max(worst[name], gap / scale)
    return [_claim(f"prox regularity {name}", w, tol) for name, w in worst.items()]


def _cloud(kind: str, d: int, lo, hi, size: int, rng) -> np.ndarray:
    if kind == "simplex":
        a = rng.dirichlet(np.ones(d), size=size)
        b = rng.dirichlet(0.2 * np.ones(d), size=size // 4)
        return np.vstack([a, b, np.eye(d)])
    pts = rng.uniform(lo, hi, size=(size, d))
    corners = np.array(np.meshgrid(*[[l, h] for l, h in zip(lo, hi)])).reshape(d, -1).T
    return np.vstack([pts, corners])


def check_prox_optimality(instances: int = 1000, cloud: int = 100_000, tol: float = 1e-8) -> list[ClaimResult]:
    """Closed-form prox beats a brute-force cloud on ``beta V[u](x) + alpha <g, x>``."""
    rng = np.random.default_rng(51)
    worst = {"simplex": -math.inf, "box": -math.inf}
    for t in range(instances):
        kind = "simplex" if t % 2 == 0 else "box"
        d = int(rng.integers(1, 5))
        beta = float(rng.uniform(0.2, 5.0))
        alpha = float(rng.uniform(0.05, 3.0))
        g = rng.standard_normal(d) * 2.0
        if kind == "simplex":
            bs = BlockSet("simplex")
            u = rng.dirichlet(np.ones(d))
            lo = hi = None
        else:
            lo = rng.uniform(-1, 0, d)
            hi = lo + rng.uniform(0.1, 2, d)
            bs = BlockSet.box(lo, hi)
            u = rng.uniform(lo, hi)
        xp = block_prox(bs, beta, u, alpha, g)
        pts = _cloud(kind, d, lo, hi, cloud, rng)
        if kind == "simplex":
            with np.errstate(divide="ignore", invalid="ignore"):
                ent = np.where(pts > 0, pts * np.log(pts / u), 0.0)
            vals = beta * (ent.sum(axis=1) - pts.sum(axis=1) + 1.0) + alpha * pts @ g
        else:
            vals = beta * 0.5 * np.sum((pts - u) ** 2, axis=1) + alpha * pts @ g
        obj = beta * block_bregman(bs, u, xp) + alpha * float(xp @ g)
        worst[kind] = max(worst[kind], obj - float(vals.min()))
    return [_claim(f"prox optimal vs {cloud}-point cloud ({k})", w, tol) for k, w in worst.items()]


def check_bregman_lower_bound(pairs: int = 10_000) -> list[ClaimResult]:
    rng = np.random.default_rng(61)
    out = []
    setups = {
        "free": make_setup([BlockSet("free")] * 2, (2, 3), (1.5, 0.7)),
        "box": make_setup([BlockSet.box(-1.0, 2.0)] * 2, (2, 2), (2.0, 0.5)),
        "matrix": make_setup([BlockSet("matrix", matrix=random_spd(3, rng))], (3,), (1.3,)),
        "simplex": make_setup([BlockSet("simplex")] * 3, (2, 3, 4), (1.0, 2.0, 0.5)),
    }
    for name, setup in setups.items():
        worst = -math.inf
        for _ in range(pairs):
            z = random_point(setup, rng)
            x = random_point(setup, rng)
            gap = 0.5 * primal_norm(x - z) ** 2 - bregman(setup, z, x)
            worst = max(worst, gap)
        out.append(_claim(f"V[z](x) >= 1/2 ||x - z||^2 ({name})", worst, 1e-12))
    return out


# ---------------------------------------------------------------- smoothness


def check_smoothness(samples: int = 1000, iters: int = 300) -> list[ClaimResult]:
    out = []
    rng = np.random.default_rng(71)
    problems = {
        "coupled": coupled_instance((2, 3, 1), seed=72),
        "chain": make_chain_quadratic(64, (16,) * 4),
        "separable": make_separable_quadratic([1.0, 4.0, 9.0], np.array([1.0, -2.0, 0.5])),
        "simplex": simplex_instance(4, 3, seed=73),
    }
    for name, prob in problems.items():
        out.append(_claim(f"block Lipschitz audit ({name})", audit_block_lipschitz(prob, rng, samples), 1 + 1e-10))
        out.append(_claim(f"aggregate smoothness audit ({name})", audit_smoothness(prob, rng, samples), 1e-12))
    for name, prob, variant in (("coupled", problems["coupled"], "block"),
                                ("simplex", problems["simplex"], "block"),
                                ("chain", problems["chain"], "full")):
        cfg = RunConfig(prob, _config(variant), iters=iters, seed=3)
        worst = -math.inf

        def cb(state, sample, setup=cfg.setup):
            nonlocal worst
            d = state.x - state.y
            g = prob.grad(state.y)
            rhs = prob.value(state.y) + pairing(g, d) + 0.5 * primal_norm(d) ** 2
            worst = max(worst, prob.value(state.x) - rhs)

        solve(cfg, callback=cb)
        out.append(_claim(f"smoothness along steps ({name}, {variant})", worst, 1e-9))
    return out


# ---------------------------------------------------------------- convergence


def mean_residuals(configs: Iterable[RunConfig]) -> tuple[np.ndarray, list]:
    traces = [solve(c) for c in configs]
    return np.mean([t.residuals() for t in traces], axis=0), traces


def controlled_rate(prob: Problem, variant: str, seeds: int, iters: int, noise: str = "uniform",
                    slack: float = 1.05) -> ClaimResult:
    regime = "uncontrolled" if noise == "none" else "controlled"
    cfgs = [RunConfig(prob, _config(variant, noise=noise, tau="optimal"), iters=iters, seed=s, regime=regime)
            for s in range(seeds)]
    mean, traces = mean_residuals(cfgs)
    t0 = traces[0]
    bound = np.array([theoretical_bound(k, A, t0.P0, t0.rho, 0.0, "controlled") for k, A in zip(t0.k, t0.A)])
    # the stored optimum of a simplex problem may sit above f_* by optimum_tol
    ratio = np.max((mean[1:] + prob.optimum_tol) / bound[1:])
    return _claim(f"E f(x_k) - f* <= 3 P0^2 / (2 A_k) ({variant}, {seeds} seeds, k <= {iters}; ratio, slack {slack})",
                  ratio, slack)


def uncontrolled_rate(prob: Problem, deltas=(1e-2, 1e-3), seeds: int = 50, iters: int = 1000,
                      noise: str = "adversarial", tail: int = 100) -> list[ClaimResult]:
    out = []
    floors = []
    setup = setup_for(prob, "coord")
    for delta in deltas:
        level = calibrate("coord", delta, setup.structure)
        cfgs = [RunConfig(prob, OracleConfig("coord", level=level, noise=noise), iters=iters, seed=s)
                for s in range(seeds)]
        mean, traces = mean_residuals(cfgs)
        t0 = traces[0]
        bound = np.array([theoretical_bound(k, A, t0.P0, t0.rho, delta, "uncontrolled") for k, A in zip(t0.k, t0.A)])
        out.append(_claim(f"E f(x_k) - f* <= 2P0^2/A_k + 4 A_k rho^2 delta^2 (delta={delta:g}; ratio)",
                          float(np.max(mean[1:] / bound[1:])), 1.0))
        floors.append(float(np.mean(mean[-tail:])))
    order = max(b - a for a, b in zip(floors, floors[1:])) if len(floors) > 1 else -1.0
    out.append(_claim(f"error floors decrease with delta (floors {', '.join(f'{f:.3g}' for f in floors)})",
                      order, 0.0))
    return out


def loglog_slope(k: np.ndarray, r: np.ndarray) -> float:
    return float(np.polyfit(np.log(k), np.log(r), 1)[0])


def acceleration(p: int = 2048, blocks: int = 4, seeds: int = 50, window=(100, 1000)) -> list[ClaimResult]:
    """Slope of log residual against log k on the chain quadratic."""
    prob = make_chain_quadratic(p, (p // blocks,) * blocks)
    lo, hi = window
    det = solve(RunConfig(prob, OracleConfig("full"), iters=hi))
    k = np.arange(lo, hi + 1)
    out = [_claim(f"deterministic log-log slope over k in [{lo}, {hi}]", loglog_slope(k, det.residuals()[lo:hi + 1]), -1.8)]
    mean, _ = mean_residuals(RunConfig(prob, OracleConfig("block"), iters=hi * blocks, seed=s) for s in range(seeds))
    kk = np.arange(lo * blocks, hi * blocks + 1)
    out.append(_claim(f"randomized ({seeds} seeds) log-log slope over k/n in [{lo}, {hi}]",
                      loglog_slope(kk / blocks, mean[lo * blocks:hi * blocks + 1]), -1.8))
    return out


def separable_instance(n: int = 10, seed: int = 81) -> Problem:
    rng = np.random.default_rng(seed)
    return make_separable_quadratic(rng.uniform(1, 10, n), rng.standard_normal(n))


def check_convergence(seeds: int = 50, iters: int = 1000) -> list[ClaimResult]:
    out = [
        controlled_rate(separable_instance(), "coord", seeds, iters, noise="none"),
        controlled_rate(simplex_instance(5, 3, seed=82), "block", seeds, iters, noise="uniform"),
    ]
    out += uncontrolled_rate(separable_instance(seed=83), seeds=seeds, iters=iters)
    out += acceleration(seeds=seeds)
    return out


def tracking_gap(prob: Problem, variant: str, seeds: int = 20, iters: int = 100, level: float = 1e-12,
                 noises=("none", "uniform")) -> float:
    """Largest ``|f(x_k^df) - f(x_k)| / (1 + |f(x_k)|)`` between a derivative-free
    run and its first-order twin driven by the same seed."""
    from .oracles import TWINS

    worst = 0.0
    for noise in noises:
        for s in range(seeds):
            a = solve(RunConfig(prob, OracleConfig(variant, level=level, noise=noise, tau="optimal"), iters=iters, seed=s))
            b = solve(RunConfig(prob, OracleConfig(TWINS[variant]), iters=iters, seed=s))
            fa, fb = np.asarray(a.f), np.asarray(b.f)
            worst = max(worst, float(np.max(np.abs(fa - fb) / (1.0 + np.abs(fb)))))
    return worst


def tracking_cases():
    rng = np.random.default_rng(6)
    A = random_spd(6, rng)
    b = rng.standard_normal(6)
    return {
        "df_dir": make_coupled_quadratic(A, b),
        "df_coord": make_coupled_quadratic(A, b),
        "df_block": make_coupled_quadratic(A, b, (2, 2, 2)),
        "df_block_rand": make_coupled_quadratic(A, b, (3, 3)),
    }


def check_tracking(seeds: int = 20, iters: int = 100) -> list[ClaimResult]:
    return [_claim(f"derivative-free {v} tracks its first-order twin", tracking_gap(p, v, seeds, iters), 1e-6)
            for v, p in tracking_cases().items()]


# ---------------------------------------------------------------- registry


SUITES: dict[str, Callable[[], list[ClaimResult]]] = {
    "coefficients": lambda: check_coefficients(),
    "gamma": lambda: check_gamma() + check_feasibility(),
    "oracles": lambda: check_unbiased(20_000) + check_bias_bounds(2_000),
    "prox": lambda: check_prox_regularity() + check_prox_optimality(200, 20_000) + check_bregman_lower_bound(2_000),
    "smoothness": lambda: check_smoothness(),
    "convergence": lambda: check_convergence(seeds=20) + check_tracking(seeds=5),
}


def run_suite(name: str) -> list[ClaimResult]:
    if name == "all":
        return [r for key in SUITES for r in SUITES[key]()]
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name]()
