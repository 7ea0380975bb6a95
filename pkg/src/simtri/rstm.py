"""Randomized similar triangles method.

The state carries three sequences: ``y`` (where the oracle is called),
``u`` (the prox sequence) and ``x`` (the output sequence).
One step is

    alpha' = largest root of A + alpha = rho^2 alpha^2,  A' = A + alpha'
    y' = (alpha' u + A x) / A'
    u' = prox_map(u, alpha', ghat(y'))
    x' = y' + rho alpha' / A' (u' - u)
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .block_space import BlockPoint
from .oracles import (
    OracleConfig,
    OracleSample,
    bias_bound,
    calibrate,
    check_compatible,
    draw,
    rho_for,
    setup_for,
)
from .problems import Problem
from .prox import ProxSetup, bregman, center_point, check_feasible, prox_map

REGIMES = ("uncontrolled", "controlled")


@dataclass(frozen=True)
class RSTMState:
    k: int
    alpha: float
    A: float
    x: BlockPoint
    y: BlockPoint
    u: BlockPoint


def init_state(rho: float, u0: BlockPoint) -> RSTMState:
    """``k = 0``, ``A_0 = alpha_0 = 1 - 1/rho`` and ``x = y = u = u0``."""
    if not rho >= 1:
        raise ValueError(f"rho must be at least 1, got {rho}")
    a0 = 1.0 - 1.0 / rho
    return RSTMState(0, a0, a0, u0, u0, u0)


def next_coefficients(A: float, rho: float) -> tuple[float, float]:
    """Largest root ``alpha`` of ``A + alpha = rho^2 alpha^2`` and ``A + alpha``."""
    if A < 0 or rho < 1:
        raise ValueError("need A >= 0 and rho >= 1")
    alpha = (1.0 + math.sqrt(1.0 + 4.0 * rho * rho * A)) / (2.0 * rho * rho)
    return alpha, A + alpha


def coefficients(K: int, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """``alpha_k`` and ``A_k`` for ``k = 0..K``."""
    alpha = np.empty(K + 1)
    A = np.empty(K + 1)
    alpha[0] = A[0] = 1.0 - 1.0 / rho
    for k in range(K):
        alpha[k + 1], A[k + 1] = next_coefficients(A[k], rho)
    return alpha, A


def coefficient_bounds(k: int | np.ndarray, rho: float) -> tuple:
    """Lower and upper envelopes ``(k-1+2rho)^2 / (4 rho^2)`` and ``(k-1+2rho)^2 / rho^2``."""
    t = (np.asarray(k, dtype=float) - 1.0 + 2.0 * rho) ** 2
    return t / (4.0 * rho * rho), t / (rho * rho)


@dataclass(frozen=True)
class GammaTable:
    """Weights ``gamma_k^l`` with ``x_k = sum_l gamma_k^l u_l``."""

    k: int
    rho: float
    coefficients: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.coefficients))


def gamma_rows(K: int, rho: float):
    """Yield the gamma table for ``k = 0..K``."""
    _, A = coefficients(K, rho)
    alpha = np.empty_like(A)
    alpha[0] = A[0]
    alpha[1:] = np.diff(A)
    row = np.array([1.0])
    yield GammaTable(0, rho, row)
    if K == 0:
        return
    row = np.array([0.0, 1.0])
    yield GammaTable(1, rho, row)
    for k in range(1, K):
        a_k = alpha[k] / A[k]
        a_next = alpha[k + 1] / A[k + 1]
        new = np.empty(k + 2)
        new[:k] = (1.0 - a_next) * row[:k]
        new[k] = a_next * (1.0 - rho * a_k) + rho * (a_k - a_next)
        new[k + 1] = rho * a_next
        row = new
        yield GammaTable(k + 1, rho, row)


def gamma_table(k: int, rho: float) -> GammaTable:
    if k < 0:
        raise ValueError("k must be non-negative")
    for table in gamma_rows(k, rho):
        pass
    return table


def delta_schedule(k: int, P0: float, rho: float, A_k: float) -> float:
    """Error level ``P0 / (4 rho A_k)`` admitted at iteration ``k``."""
    if not P0 > 0:
        raise ValueError("P0 must be positive")
    return P0 / (4.0 * rho * A_k)


def iterations_for_accuracy(epsilon: float, P0: float, rho: float) -> int:
    """``max(ceil(rho sqrt(6 P0^2 / eps) + 1 - 2 rho), 0)``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return max(math.ceil(rho * math.sqrt(6.0 * P0 * P0 / epsilon) + 1.0 - 2.0 * rho), 0)


def theoretical_bound(k: int, A_k: float, P0: float, rho: float, delta: float, regime: str) -> float:
    """Expected-residual bound at iteration ``k``; ``inf`` at ``k = 0``."""
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    if k == 0 or A_k <= 0:
        return math.inf
    if regime == "controlled":
        return 3.0 * P0 * P0 / (2.0 * A_k)
    return 2.0 * P0 * P0 / A_k + 4.0 * A_k * rho * rho * delta * delta


def initial_potential(problem: Problem, setup: ProxSetup, u0: BlockPoint, rho: float) -> float:
    """``P0 = sqrt(A_0 (f(u0) - f*) + V[u0](x*))``."""
    if problem.x_star is None or problem.f_star is None:
        raise ValueError("the problem has no stored optimum; pass P0 explicitly")
    a0 = 1.0 - 1.0 / rho
    x_star = BlockPoint(setup.structure, problem.x_star.data)
    gap = max(problem.value(u0) - problem.f_star, 0.0)
    return math.sqrt(a0 * gap + bregman(setup, u0, x_star))


def iterate(state: RSTMState, setup: ProxSetup, problem: Problem, config: OracleConfig, rng,
            noise_rng=None, rho: float | None = None) -> tuple[RSTMState, OracleSample]:
    """One step of the method; ``config.level`` is the oracle error used."""
    rho = rho_for(config.variant, setup.structure) if rho is None else rho
    alpha, A_next = next_coefficients(state.A, rho)
    y = BlockPoint(setup.structure, (alpha * state.u.data + state.A * state.x.data) / A_next)
    sample = draw(problem, setup, y, config, rng, noise_rng, exact=False)
    u = prox_map(setup, state.u, alpha, sample.ghat)
    x = BlockPoint(setup.structure, y.data + (rho * alpha / A_next) * (u.data - state.u.data))
    return RSTMState(state.k + 1, alpha, A_next, x, y, u), sample


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    choice, noise = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(choice), np.random.default_rng(noise)


@dataclass
class RunConfig:
    """Everything one run needs.

    Stop after ``iters`` steps, or after the number of steps that guarantees
    accuracy ``epsilon`` when ``epsilon`` is given. In the controlled regime
    the oracle level is recalibrated so that its bias bound never exceeds
    ``P0 / (4 rho A)``: with ``schedule="horizon"`` ``A`` is the final
    ``A_K`` (the level is constant), with ``"per_step"`` it is the
    coefficient ``A_{k+1}`` of the step being taken.
    """

    problem: Problem
    oracle: OracleConfig
    setup: ProxSetup | None = None
    rho: float | None = None
    u0: BlockPoint | None = None
    iters: int | None = None
    epsilon: float | None = None
    regime: str = "uncontrolled"
    schedule: str = "horizon"
    P0: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.schedule not in ("horizon", "per_step"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if (self.iters is None) == (self.epsilon is None):
            raise ValueError("give exactly one of iters and epsilon")
        if self.iters is not None and self.iters < 0:
            raise ValueError("iters must be non-negative")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.setup is None:
            self.setup = setup_for(self.problem, self.oracle.variant)
        check_compatible(self.oracle.variant, self.setup)
        if self.rho is None:
            self.rho = rho_for(self.oracle.variant, self.setup.structure)
        if not self.rho >= 1:
            raise ValueError("rho must be at least 1")
        if self.u0 is None:
            self.u0 = center_point(self.setup)
        self.u0 = BlockPoint(self.setup.structure, self.u0.data)
        check_feasible(self.setup, self.u0, interior=True)
        if self.P0 is None and self.problem.x_star is not None:
            self.P0 = initial_potential(self.problem, self.setup, self.u0, self.rho)
        if (self.regime == "controlled" or self.epsilon is not None) and not (self.P0 and self.P0 > 0):
            raise ValueError("this run needs a positive P0")

    @property
    def stopping(self) -> str:
        return "fixed_iters" if self.epsilon is None else "target_accuracy"

    def horizon(self) -> int:
        if self.iters is not None:
            return self.iters
        return iterations_for_accuracy(self.epsilon, self.P0, self.rho)


@dataclass
class Trace:
    """Per-iteration records; row 0 is the starting point."""

    k: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    A: list = field(default_factory=list)
    f: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    delta: list = field(default_factory=list)
    support: list = field(default_factory=list)
    wall_ns: list = field(default_factory=list)
    status: str = "running"
    stopping: str = "fixed_iters"
    seed: int = 0
    P0: float | None = None
    rho: float = 1.0
    final: RSTMState | None = None

    def append(self, state: RSTMState, f: float, residual: float, delta: float, support: str, wall_ns: int):
        self.k.append(state.k)
        self.alpha.append(state.alpha)
        self.A.append(state.A)
        self.f.append(f)
        self.residual.append(residual)
        self.delta.append(delta)
        self.support.append(support)
        self.wall_ns.append(wall_ns)

    def __len__(self):
        return len(self.k)

    def residuals(self) -> np.ndarray:
        return np.asarray(self.residual, dtype=float)


def _level_for(config: RunConfig, A: float) -> float:
    delta = delta_schedule(0, config.P0, config.rho, A)
    return calibrate(config.oracle.variant, delta, config.setup.structure)


def solve(config: RunConfig, callback: Callable[[RSTMState, OracleSample], None] | None = None) -> Trace:
    """Run the method; ``callback(state, sample)`` sees every step."""
    problem, setup, rho = config.problem, config.setup, config.rho
    K = config.horizon()
    rng, noise_rng = _streams(config.seed)
    state = init_state(rho, config.u0)
    trace = Trace(stopping=config.stopping, seed=config.seed, P0=config.P0, rho=rho)
    oracle = config.oracle
    if config.regime == "controlled":
        if oracle.derivative_free and oracle.tau != "optimal":
            raise ValueError("controlled derivative-free runs need tau='optimal'")
        A_K = coefficients(K, rho)[1][-1] if K > 0 else 1.0
        if config.schedule == "horizon":
            oracle = oracle.with_level(_level_for(config, A_K))
    f0 = problem.value(state.x)
    trace.append(state, f0, problem.residual(state.x), 0.0, "", 0)
    delta = bias_bound(oracle, setup.structure).delta
    for _ in range(K):
        if config.regime == "controlled" and config.schedule == "per_step":
            oracle = oracle.with_level(_level_for(config, next_coefficients(state.A, rho)[1]))
            delta = bias_bound(oracle, setup.structure).delta
        t0 = time.perf_counter_ns()
        state, sample = iterate(state, setup, problem, oracle, rng, noise_rng, rho)
        wall = time.perf_counter_ns() - t0
        if callback is not None:
            callback(state, sample)
        fx = problem.value(state.x)
        trace.append(state, fx, fx - problem.f_star if problem.f_star is not None else math.nan,
                     delta, sample.label, wall)
    trace.status = "completed"
    trace.final = state
    return trace


def reference_solve(problem: Problem, setup: ProxSetup, iters: int = 20000, target_gap: float = 1e-13,
                    u0: BlockPoint | None = None) -> BlockPoint:
    """Deterministic full-gradient run (``rho = 1``), restarted from the current
    point whenever the objective increases; stops once the Frank-Wolfe gap
    (simplex problems) drops below ``target_gap``. Returns the best point."""
    u = center_point(setup) if u0 is None else u0
    cfg = OracleConfig("full")
    rng = np.random.default_rng(0)
    state = init_state(1.0, u)
    best, f_best = state.x, problem.value(state.x)
    gap_fn = getattr(problem, "frank_wolfe_gap", None)
    for it in range(iters):
        state, _ = iterate(state, setup, problem, cfg, rng, rho=1.0)
        fx = problem.value(state.x)
        if fx < f_best:
            best, f_best = state.x, fx
        else:
            state = init_state(1.0, _interior(setup, best))
        if gap_fn is not None and it % 50 == 0 and gap_fn(best) <= target_gap:
            break
    return best


def _interior(setup: ProxSetup, x: BlockPoint) -> BlockPoint:
    """Nudge simplex blocks off the boundary so ``x`` can restart the prox sequence."""
    data = np.array(x.data)
    for i, bs in enumerate(setup.sets):
        if bs.kind == "simplex":
            sl = setup.structure.span(i)
            v = np.maximum(data[sl], np.finfo(float).tiny)
            data[sl] = v / v.sum()
    return BlockPoint(setup.structure, data)
