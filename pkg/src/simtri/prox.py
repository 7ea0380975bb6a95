"""Proximal setups: prox-functions, Bregman divergences and prox-mappings.

Each block carries a feasible set and the matching prox-function:

* ``free``    -- ``Q_i = R^{p_i}``, ``d_i = 1/2 ||x||_2^2``
* ``box``     -- ``lower <= x <= upper`` coordinate-wise, same ``d_i``
* ``matrix``  -- ``Q_i = R^{p_i}``, ``d_i = 1/2 <B_i x, x>``
* ``simplex`` -- standard simplex, ``d_i = sum_j x_j ln x_j`` (l1 norm)

The aggregate prox-function is ``d(x) = sum_i beta_i d_i(x^(i))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import rel_entr, xlogy

from .block_space import (
    BlockPoint,
    BlockStructure,
    SparseBlockDual,
    StructureMismatch,
    pairing,
)

SET_KINDS = ("free", "box", "matrix", "simplex")
_NORM_FOR_SET = {"free": "euclidean", "box": "euclidean", "matrix": "euclidean_matrix", "simplex": "l1"}

SIMPLEX_SUM_TOL = 1e-12


class InfeasiblePointError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BlockSet:
    """Feasible set of one block together with its prox-function."""

    kind: str = "free"
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in SET_KINDS:
            raise ValueError(f"unknown set kind {self.kind!r}")
        if self.kind == "box":
            lo = np.asarray(self.lower if self.lower is not None else -np.inf, dtype=float)
            hi = np.asarray(self.upper if self.upper is not None else np.inf, dtype=float)
            if np.any(lo > hi):
                raise ValueError("box needs lower <= upper")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        if self.kind == "matrix":
            if self.matrix is None:
                raise ValueError("matrix blocks need B_i")
            object.__setattr__(self, "matrix", np.array(self.matrix, dtype=float))

    @classmethod
    def box(cls, lower, upper):
        return cls("box", lower=lower, upper=upper)

    @property
    def norm(self) -> str:
        return _NORM_FOR_SET[self.kind]

    @property
    def separable(self) -> bool:
        """True when the set is a product of intervals."""
        return self.kind in ("free", "box")

    def bounds(self, dim: int) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "box":
            return np.broadcast_to(self.lower, (dim,)), np.broadcast_to(self.upper, (dim,))
        return np.full(dim, -np.inf), np.full(dim, np.inf)

    def __eq__(self, other):
        if not isinstance(other, BlockSet):
            return NotImplemented
        same = lambda a, b: (a is None and b is None) or (
            a is not None and b is not None and np.array_equal(a, b)
        )
        return (
            self.kind == other.kind
            and same(self.lower, other.lower)
            and same(self.upper, other.upper)
            and same(self.matrix, other.matrix)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ProxSetup:
    structure: BlockStructure
    sets: tuple[BlockSet, ...]

    def __post_init__(self):
        sets = tuple(self.sets)
        s = self.structure
        if len(sets) != s.n:
            raise StructureMismatch("one set per block required")
        for i, bs in enumerate(sets):
            if s.norms[i] != bs.norm:
                raise ValueError(f"block {i}: set {bs.kind!r} requires a {bs.norm} norm, got {s.norms[i]}")
            if bs.kind == "matrix" and not np.array_equal(s.matrices[i], bs.matrix):
                raise ValueError(f"block {i}: norm matrix and prox matrix differ")
            if bs.kind == "simplex" and s.dims[i] < 1:
                raise ValueError("empty simplex")
        object.__setattr__(self, "sets", sets)
        # flat weights and bounds for vectorised full-support updates
        separable = all(bs.separable for bs in sets)
        object.__setattr__(self, "_separable", separable)
        if separable:
            lo, hi = zip(*(bs.bounds(d) for bs, d in zip(sets, s.dims)))
            object.__setattr__(self, "_weights", np.repeat(np.asarray(s.weights), s.dims))
            object.__setattr__(self, "_lower", np.concatenate(lo))
            object.__setattr__(self, "_upper", np.concatenate(hi))

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(bs.kind for bs in self.sets)


def make_setup(sets: Sequence[BlockSet], dims: Sequence[int], weights: Sequence[float]) -> ProxSetup:
    """Build a setup whose block norms are the ones each set requires."""
    sets = tuple(sets)
    structure = BlockStructure(
        tuple(dims),
        tuple(weights),
        tuple(bs.norm for bs in sets),
        tuple(bs.matrix if bs.kind == "matrix" else None for bs in sets),
    )
    return ProxSetup(structure, sets)


def check_feasible(setup: ProxSetup, x: BlockPoint, interior: bool = True, tol: float = 0.0) -> None:
    """Raise :class:`InfeasiblePointError` unless ``x`` lies in ``Q`` (or ``Q^0``).

    ``interior`` demands strictly positive simplex coordinates, which is
    where the entropy prox-function is differentiable.
    """
    s = setup.structure
    if x.structure != s:
        raise StructureMismatch("point does not belong to the setup's space")
    for i, bs in enumerate(setup.sets):
        v = x.block(i)
        if not np.all(np.isfinite(v)):
            raise InfeasiblePointError(f"block {i} has non-finite entries")
        if bs.kind == "box":
            lo, hi = bs.bounds(v.size)
            if np.any(v < lo - tol) or np.any(v > hi + tol):
                raise InfeasiblePointError(f"block {i} leaves its box")
        elif bs.kind == "simplex":
            if abs(v.sum() - 1.0) > max(tol, SIMPLEX_SUM_TOL):
                raise InfeasiblePointError(f"block {i} does not sum to one (sum={v.sum()!r})")
            if interior and np.any(v <= 0.0):
                raise InfeasiblePointError(f"block {i} touches the simplex boundary")
            if np.any(v < -tol):
                raise InfeasiblePointError(f"block {i} has negative entries")


def is_feasible(setup: ProxSetup, x: BlockPoint, interior: bool = False, tol: float = 0.0) -> bool:
    try:
        check_feasible(setup, x, interior=interior, tol=tol)
    except InfeasiblePointError:
        return False
    return True


def center_point(setup: ProxSetup) -> BlockPoint:
    """A canonical point of ``Q^0``: zeros clipped into boxes, simplex barycentres."""
    blocks = []
    for d, bs in zip(setup.structure.dims, setup.sets):
        if bs.kind == "simplex":
            blocks.append(np.full(d, 1.0 / d))
        elif bs.kind == "box":
            lo, hi = bs.bounds(d)
            blocks.append(np.clip(np.zeros(d), lo, hi))
        else:
            blocks.append(np.zeros(d))
    return BlockPoint.from_blocks(setup.structure, blocks)


def _block_prox_value(bs: BlockSet, v: np.ndarray) -> float:
    if bs.kind == "simplex":
        return float(np.sum(xlogy(v, v)))
    if bs.kind == "matrix":
        return 0.5 * float(v @ bs.matrix @ v)
    return 0.5 * float(np.dot(v, v))


def prox_value(setup: ProxSetup, x: BlockPoint) -> float:
    """``d(x) = sum_i beta_i d_i(x^(i))`` with ``0 ln 0 = 0``."""
    check_feasible(setup, x, interior=False, tol=SIMPLEX_SUM_TOL)
    w = setup.structure.weights
    total = 0.0
    for i, bs in enumerate(setup.sets):
        total += w[i] * _block_prox_value(bs, x.block(i))
    return total


def block_bregman(bs: BlockSet, z: np.ndarray, x: np.ndarray) -> float:
    """Unweighted ``V_i[z](x)``."""
    if bs.kind == "simplex":
        if np.any(z <= 0):
            raise InfeasiblePointError("entropy Bregman divergence needs z > 0")
        # general form: sum x ln(x/z) - sum x + sum z; equals KL on the simplex
        return float(np.sum(rel_entr(x, z)) - np.sum(x) + np.sum(z))
    h = x - z
    if bs.kind == "matrix":
        return 0.5 * float(h @ bs.matrix @ h)
    return 0.5 * float(np.dot(h, h))


def bregman(setup: ProxSetup, z: BlockPoint, x: BlockPoint) -> float:
    """``V[z](x) = sum_i beta_i V_i[z^(i)](x^(i))`` for ``z`` in ``Q^0``, ``x`` in ``Q``."""
    check_feasible(setup, z, interior=True, tol=SIMPLEX_SUM_TOL)
    w = setup.structure.weights
    total = 0.0
    for i, bs in enumerate(setup.sets):
        total += w[i] * block_bregman(bs, z.block(i), x.block(i))
    return total


def block_prox(bs: BlockSet, beta: float, u: np.ndarray, alpha: float, g: np.ndarray) -> np.ndarray:
    """argmin over the block set of ``beta V_i[u](x) + alpha <g, x>``."""
    if bs.kind == "simplex":
        # multiplicative weights in the log domain
        logits = np.log(u) - (alpha / beta) * g
        w = np.exp(logits - logits.max())
        out = w / w.sum()
        if np.any(out <= 0.0):
            out = np.maximum(out, np.finfo(float).tiny)
            out /= out.sum()
        return out
    if bs.kind == "matrix":
        return u - (alpha / beta) * np.linalg.solve(bs.matrix, g)
    step = u - (alpha / beta) * g
    if bs.kind == "box":
        lo, hi = bs.bounds(u.size)
        return np.clip(step, lo, hi)
    return step


def prox_map(setup: ProxSetup, u: BlockPoint, alpha: float, ghat: SparseBlockDual) -> BlockPoint:
    """``argmin_{x in Q} V[u](x) + alpha <ghat, x>``.

    The problem separates over blocks; blocks outside ``ghat.support`` are
    copied from ``u`` unchanged.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    s = setup.structure
    if ghat.structure != s:
        raise StructureMismatch("oracle output does not match the setup")
    if setup._separable and ghat.full:
        return BlockPoint(s, np.clip(u.data - (alpha / setup._weights) * ghat.flat(), setup._lower, setup._upper))
    out = np.array(u.data)
    for i, g in ghat.items():
        bs = setup.sets[i]
        ui = u.block(i)
        if bs.kind == "simplex" and (np.any(ui <= 0) or abs(ui.sum() - 1.0) > SIMPLEX_SUM_TOL):
            raise InfeasiblePointError(f"block {i} of u is not in the simplex interior")
        out[s.span(i)] = block_prox(bs, s.weights[i], ui, alpha, g)
    return BlockPoint(s, out)


def prox_objective(setup: ProxSetup, u: BlockPoint, alpha: float, ghat: SparseBlockDual, x: BlockPoint) -> float:
    return bregman(setup, u, x) + alpha * pairing(ghat, x)


def prox_regularity_check(setup: ProxSetup, problem, y: BlockPoint, u: BlockPoint, alpha: float, sample) -> float:
    """Gap ``|<R_b R_f^T grad f(y), u - u+> - <grad f(y), u - u+>|``.

    ``sample`` is an oracle sample drawn at ``y``; its ``projected`` field
    is ``R_b R_f^T grad f(y)`` without the ``rho`` factor.
    """
    u_plus = prox_map(setup, u, alpha, sample.ghat)
    step = u - u_plus
    grad = problem.grad(y)
    return abs(pairing(sample.projected, step) - pairing(grad, step))
