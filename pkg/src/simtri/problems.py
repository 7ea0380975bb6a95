"""Benchmark objectives with exact gradients and known optima.

All three families are quadratics, so they extend analytically to the whole
space; derivative-free oracles may evaluate them slightly outside ``Q``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from .block_space import BlockDual, BlockPoint, BlockStructure, block_dual_norm, block_norm, pairing, primal_norm
from .prox import BlockSet, ProxSetup, make_setup


def _flat(x) -> np.ndarray:
    return x.data if isinstance(x, (BlockPoint, BlockDual)) else np.asarray(x, dtype=float)


class Problem:
    """Smooth convex objective on a product of block sets.

    Subclasses implement ``_value`` and ``_grad`` on flat arrays and may
    override ``_block_grad`` with something cheaper than a full gradient.
    """

    name = "problem"

    def __init__(self, dims: Sequence[int], sets: Sequence[BlockSet], lipschitz: Sequence[float], global_lipschitz: float):
        self.dims = tuple(int(d) for d in dims)
        self.sets = tuple(sets)
        if len(self.sets) != len(self.dims):
            raise ValueError("one set per block required")
        self.lipschitz = tuple(float(v) for v in lipschitz)
        self.global_lipschitz = float(global_lipschitz)
        # the lipschitz-weighted structure; used to build blocks for gradients
        self.structure = make_setup(self.sets, self.dims, self.lipschitz).structure
        self.f_star: float | None = None
        self.x_star: BlockPoint | None = None
        self.optimum_tol = 0.0

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def p(self) -> int:
        return sum(self.dims)

    def setup(self, weights: Sequence[float] | None = None) -> ProxSetup:
        return make_setup(self.sets, self.dims, self.lipschitz if weights is None else weights)

    def value(self, x) -> float:
        return float(self._value(_flat(x)))

    def grad(self, x) -> BlockDual:
        s = x.structure if isinstance(x, BlockPoint) else self.structure
        return BlockDual(s, self._grad(_flat(x)))

    def block_grad(self, i: int, x) -> np.ndarray:
        return self._block_grad(i, _flat(x))

    def dir_deriv(self, x, e) -> float:
        return float(np.dot(self._grad(_flat(x)), _flat(e)))

    def residual(self, x) -> float:
        if self.f_star is None:
            return float("nan")
        return self.value(x) - self.f_star

    def _slice(self, i: int) -> slice:
        return self.structure.span(i)

    def _block_grad(self, i, x):
        return self._grad(x)[self._slice(i)]

    def _value(self, x):
        raise NotImplementedError

    def _grad(self, x):
        raise NotImplementedError


class SeparableQuadratic(Problem):
    """``f(x) = 1/2 sum_i L_i ||x^(i) - c^(i)||^2``."""

    name = "separable_quadratic"

    def __init__(self, lipschitz, center: np.ndarray, dims, sets):
        super().__init__(dims, sets, lipschitz, max(lipschitz))
        self.center = np.array(center, dtype=float)
        self._diag = np.repeat(np.asarray(self.lipschitz), self.dims)

    def _value(self, x):
        h = x - self.center
        return 0.5 * np.dot(self._diag * h, h)

    def _grad(self, x):
        return self._diag * (x - self.center)

    def _block_grad(self, i, x):
        sl = self._slice(i)
        return self.lipschitz[i] * (x[sl] - self.center[sl])


class CoupledQuadratic(Problem):
    """``f(x) = 1/2 x^T A x - b^T x`` with a dense or sparse SPD ``A``."""

    name = "coupled_quadratic"

    def __init__(self, A, b, dims, sets, lipschitz, global_lipschitz):
        super().__init__(dims, sets, lipschitz, global_lipschitz)
        self.A = A
        self.b = np.array(b, dtype=float)
        self._rows = [A[self._slice(i)] for i in range(self.n)]

    def _value(self, x):
        return 0.5 * np.dot(x, self.A @ x) - np.dot(self.b, x)

    def _grad(self, x):
        return self.A @ x - self.b

    def _block_grad(self, i, x):
        return self._rows[i] @ x - self.b[self._slice(i)]


class SimplexQuadratic(Problem):
    """``f(x) = 1/2 ||M x - b||^2`` on a product of simplexes."""

    name = "simplex_quadratic"

    def __init__(self, M, b, dims, lipschitz, global_lipschitz):
        super().__init__(dims, [BlockSet("simplex")] * len(dims), lipschitz, global_lipschitz)
        self.M = np.array(M, dtype=float)
        self.b = np.array(b, dtype=float)
        self._cols = [self.M[:, self._slice(i)] for i in range(self.n)]

    def _value(self, x):
        r = self.M @ x - self.b
        return 0.5 * np.dot(r, r)

    def _grad(self, x):
        return self.M.T @ (self.M @ x - self.b)

    def _block_grad(self, i, x):
        return self._cols[i].T @ (self.M @ x - self.b)

    def frank_wolfe_gap(self, x) -> float:
        """``sum_i <g_i, x_i> - min_j g_ij``, an upper bound on ``f(x) - f*``."""
        x = _flat(x)
        g = self._grad(x)
        gap = 0.0
        for i in range(self.n):
            sl = self._slice(i)
            gap += float(np.dot(g[sl], x[sl]) - g[sl].min())
        return gap


def _box_sets(dims, lower, upper) -> list[BlockSet]:
    if lower is None and upper is None:
        return [BlockSet("free") for _ in dims]
    offsets = np.concatenate([[0], np.cumsum(dims)])
    p = offsets[-1]
    lo = np.broadcast_to(np.asarray(-np.inf if lower is None else lower, dtype=float), (p,))
    hi = np.broadcast_to(np.asarray(np.inf if upper is None else upper, dtype=float), (p,))
    return [BlockSet.box(lo[a:b].copy(), hi[a:b].copy()) for a, b in zip(offsets[:-1], offsets[1:])]


def make_separable_quadratic(lipschitz, center, dims=None, lower=None, upper=None) -> SeparableQuadratic:
    """Separable quadratic, unconstrained or on a box; the optimum is the clamped centre."""
    lipschitz = [float(v) for v in lipschitz]
    if any(v <= 0 for v in lipschitz):
        raise ValueError("Lipschitz constants must be positive")
    center = _flat(center).astype(float).reshape(-1)
    dims = tuple(dims) if dims is not None else (1,) * len(lipschitz)
    if len(dims) != len(lipschitz) or sum(dims) != center.size:
        raise ValueError("dims, lipschitz and center disagree")
    sets = _box_sets(dims, lower, upper)
    prob = SeparableQuadratic(lipschitz, center, dims, sets)
    lo, hi = zip(*(bs.bounds(d) for bs, d in zip(sets, dims)))
    x_star = np.clip(center, np.concatenate(lo), np.concatenate(hi))
    prob.x_star = BlockPoint(prob.structure, x_star)
    prob.f_star = prob.value(x_star)
    return prob


def _lambda_max(block) -> float:
    if sp.issparse(block):
        if block.shape[0] <= 64:
            block = block.toarray()
        else:
            return float(sp.linalg.eigsh(block.astype(float), k=1, which="LA", return_eigenvectors=False, tol=1e-12)[0])
    return float(scipy.linalg.eigvalsh(block)[-1])


def make_coupled_quadratic(A, b, dims=None, lipschitz_margin: float = 0.0,
                           sets: Sequence[BlockSet] | None = None) -> CoupledQuadratic:
    """``1/2 x^T A x - b^T x``, unconstrained unless ``sets`` says otherwise.

    The optimum ``A^{-1} b`` is stored only for the unconstrained problem.

    ``L_i`` is the largest eigenvalue of the diagonal block ``A_ii``
    (inflated by ``lipschitz_margin`` relative, to absorb eigensolver error).
    """
    A = A.tocsr().astype(float) if sp.issparse(A) else np.array(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    p = A.shape[0]
    if A.shape != (p, p) or b.size != p:
        raise ValueError("A must be square and match b")
    dims = tuple(dims) if dims is not None else (1,) * p
    if sum(dims) != p:
        raise ValueError("block dims do not add up to the dimension")
    asym = abs(A - A.T).max() if sp.issparse(A) else np.max(np.abs(A - A.T))
    if asym > 1e-12 * max(1.0, abs(A).max()):
        raise ValueError("A must be symmetric")
    if sp.issparse(A):
        if _lambda_min_sparse(A) <= 0:
            raise ValueError("A must be positive definite")
        x_star = sp.linalg.splu(A.tocsc()).solve(b)
    else:
        try:
            chol = scipy.linalg.cho_factor(A)
        except np.linalg.LinAlgError as exc:
            raise ValueError("A must be positive definite") from exc
        x_star = scipy.linalg.cho_solve(chol, b)
    offsets = np.concatenate([[0], np.cumsum(dims)])
    lips = []
    for a, c in zip(offsets[:-1], offsets[1:]):
        lips.append(_lambda_max(A[a:c, a:c]) * (1 + lipschitz_margin))
    L = _lambda_max(A) * (1 + lipschitz_margin)
    sets = [BlockSet("free") for _ in dims] if sets is None else list(sets)
    prob = CoupledQuadratic(A, b, dims, sets, lips, L)
    if all(bs.kind == "free" for bs in sets):
        prob.x_star = BlockPoint(prob.structure, x_star)
        prob.f_star = -0.5 * float(np.dot(b, x_star))
    return prob


def _lambda_min_sparse(A) -> float:
    if A.shape[0] <= 64:
        return float(scipy.linalg.eigvalsh(A.toarray())[0])
    return float(sp.linalg.eigsh(A, k=1, sigma=0, which="LM", return_eigenvectors=False)[0])


def chain_matrix(p: int) -> sp.csr_matrix:
    """Tridiagonal ``tridiag(-1, 2, -1)`` of size ``p`` (eigenvalues in (0, 4))."""
    return sp.diags([-np.ones(p - 1), 2 * np.ones(p), -np.ones(p - 1)], [-1, 0, 1], format="csr")


def make_chain_quadratic(p: int, dims=None, profile: float = 0.5) -> CoupledQuadratic:
    """Tridiagonal quadratic ``1/2 x^T T x - b^T x`` with a prescribed optimum.

    In the eigenbasis of ``T`` (the orthonormal sine basis) the optimum has
    coefficients ``s_j^(-profile)`` with ``s_j = sqrt(lambda_j / lambda_max)``.
    With ``profile = 0.5`` every curvature scale carries comparable weight
    and accelerated residuals decay like ``1/k^2`` until ``k`` approaches
    ``p``; ``profile = 1`` behaves like the classical ``b = e_1`` instance
    whose residuals only decay like ``1/k`` in that range.
    """
    T = chain_matrix(p)
    j = np.arange(1, p + 1)
    lam = 2.0 - 2.0 * np.cos(j * np.pi / (p + 1))
    coef = np.sqrt(lam / lam.max()) ** (-profile)
    x_star = scipy.fft.idst(coef, type=1, norm="ortho")
    return make_coupled_quadratic(T, T @ x_star, dims)


def make_simplex_quadratic(M, b, dims, reference_iters: int = 20000, target_gap: float = 1e-13) -> SimplexQuadratic:
    """``1/2 ||M x - b||^2`` over a product of simplexes.

    The optimum is found by a deterministic reference run of the method
    (``rho = 1``, exact gradients, entropy prox, restarted whenever the
    objective increases). ``optimum_tol`` stores the Frank-Wolfe gap of
    the returned point, which bounds ``f(x*) - f_*`` from above.
    """
    M = np.array(M, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims) or sum(dims) != M.shape[1] or M.shape[0] != b.size:
        raise ValueError("degenerate simplex dims or mismatched M/b")
    offsets = np.concatenate([[0], np.cumsum(dims)])
    lips = []
    for a, c in zip(offsets[:-1], offsets[1:]):
        Mi = M[:, a:c]
        lips.append(float(scipy.linalg.eigvalsh(Mi.T @ Mi)[-1]))
    L = float(scipy.linalg.eigvalsh(M.T @ M)[-1])
    prob = SimplexQuadratic(M, b, dims, lips, L)

    from .rstm import reference_solve

    x = reference_solve(prob, prob.setup([L] * len(dims)), iters=reference_iters, target_gap=target_gap)
    prob.x_star = x
    prob.f_star = prob.value(x)
    prob.optimum_tol = max(prob.frank_wolfe_gap(x), 0.0)
    return prob


NOISE_MODELS = ("none", "uniform", "adversarial")


@dataclass
class NoisyValueOracle:
    """Inexact values ``f~(x)`` with ``|f~(x) - f(x)| <= level``.

    ``adversarial`` returns ``f + side * level``; derivative-free oracles
    call it with ``side=+1`` at shifted points and ``side=-1`` at the base
    point, so every forward difference is corrupted by exactly
    ``2 level / tau``.
    """

    problem: Problem
    level: float = 0.0
    model: str = "none"

    def __post_init__(self):
        if self.model not in NOISE_MODELS:
            raise ValueError(f"unknown noise model {self.model!r}")
        if self.level < 0:
            raise ValueError("noise level must be non-negative")

    def value(self, x, rng: np.random.Generator | None = None, side: int = 1) -> float:
        f = self.problem.value(x)
        if self.level == 0.0 or self.model == "none":
            return f
        if self.model == "adversarial":
            eta = side * self.level
        else:
            eta = rng.uniform(-self.level, self.level)
        out = f + eta
        # rounding of f + eta may overshoot the level by an ulp of f
        while abs(out - f) > self.level:
            out = float(np.nextafter(out, f))
        assert abs(out - f) <= self.level
        return out


def noisy_value(oracle: NoisyValueOracle, x, rng=None, side: int = 1) -> float:
    return oracle.value(x, rng, side)


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    worst_coordinate: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def __str__(self):
        verdict = "pass" if self.passed else f"FAIL at coordinate {self.worst_coordinate}"
        return f"grad_check: max rel error {self.max_rel_error:.3e} (tol {self.tolerance:g}) {verdict}"


def grad_check(problem: Problem, x, h: float = 1e-5, tol: float = 1e-6,
               grad: Callable | None = None) -> GradCheckReport:
    """Central differences against the analytic gradient.

    Errors are measured per coordinate relative to ``max(1, |g_j|)``.
    """
    x = _flat(x).astype(float)
    g = _flat(problem.grad(x) if grad is None else grad(x))
    fd = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        fd[j] = (problem.value(x + e) - problem.value(x - e)) / (2 * h)
    rel = np.abs(fd - g) / np.maximum(1.0, np.abs(g))
    j = int(np.argmax(rel))
    return GradCheckReport(float(rel[j]), j, tol)


def _random_block_vector(structure: BlockStructure, i: int, rng) -> np.ndarray:
    return rng.standard_normal(structure.dims[i])


def audit_block_lipschitz(problem: Problem, rng: np.random.Generator, samples: int = 1000,
                          scale: float = 1.0) -> float:
    """Largest observed ``||f'_i(x + U_i h) - f'_i(x)||_{i,*} / (L_i ||h||_i)``."""
    s = problem.structure
    worst = 0.0
    for _ in range(samples):
        i = int(rng.integers(problem.n))
        x = scale * rng.standard_normal(problem.p)
        h = _random_block_vector(s, i, rng)
        xh = x.copy()
        xh[s.span(i)] += h
        diff = problem.block_grad(i, xh) - problem.block_grad(i, x)
        ratio = block_dual_norm(s, i, diff) / (problem.lipschitz[i] * block_norm(s, i, h))
        worst = max(worst, ratio)
    return worst


def audit_smoothness(problem: Problem, rng: np.random.Generator, samples: int = 1000,
                     weights: Sequence[float] | None = None) -> float:
    """Largest violation of ``f(x) <= f(y) + <grad f(y), x - y> + 1/2 ||x - y||_E^2``
    over random single-block moves ``x = y + U_i h``; non-positive means the
    inequality held everywhere."""
    s = problem.setup(weights).structure
    worst = -np.inf
    for _ in range(samples):
        i = int(rng.integers(problem.n))
        y = BlockPoint(s, rng.standard_normal(problem.p))
        step = np.zeros(problem.p)
        step[s.span(i)] = _random_block_vector(s, i, rng)
        x = BlockPoint(s, y.data + step)
        d = x - y
        gy = BlockDual(s, problem.grad(y).data)
        rhs = problem.value(y) + pairing(gy, d) + 0.5 * primal_norm(d) ** 2
        worst = max(worst, (problem.value(x) - rhs) / max(1.0, abs(rhs)))
    return float(worst)
