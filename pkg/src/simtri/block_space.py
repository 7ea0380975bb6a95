"""Block-structured vector spaces.

A space ``E = E_1 x ... x E_n`` is described by a :class:`BlockStructure`.
Primal vectors (:class:`BlockPoint`) and dual vectors (:class:`BlockDual`)
are stored as one flat float64 array with per-block views; a
:class:`SparseBlockDual` stores only the blocks in its support.

Block indices are 0-based throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NORM_KINDS = ("euclidean", "euclidean_matrix", "l1")


class StructureMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BlockStructure:
    """Block dimensions, norm weights and per-block norm kinds.

    ``matrices[i]`` holds the SPD matrix ``B_i`` for ``euclidean_matrix``
    blocks and ``None`` otherwise.
    """

    dims: tuple[int, ...]
    weights: tuple[float, ...]
    norms: tuple[str, ...] = ()
    matrices: tuple = ()
    offsets: tuple[int, ...] = field(init=False, repr=False)
    _slices: tuple = field(init=False, repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        n = len(dims)
        if n < 1:
            raise ValueError("need at least one block")
        if any(d < 1 for d in dims):
            raise ValueError(f"block dimensions must be positive, got {dims}")
        weights = tuple(float(w) for w in self.weights)
        if len(weights) != n:
            raise ValueError("one weight per block required")
        if not all(np.isfinite(w) and w > 0 for w in weights):
            raise ValueError(f"weights must be positive, got {weights}")
        norms = tuple(self.norms) if self.norms else ("euclidean",) * n
        if len(norms) != n:
            raise ValueError("one norm kind per block required")
        for kind in norms:
            if kind not in NORM_KINDS:
                raise ValueError(f"unknown norm kind {kind!r}")
        matrices = tuple(self.matrices) if self.matrices else (None,) * n
        if len(matrices) != n:
            raise ValueError("one matrix slot per block required")
        checked = []
        for d, kind, B in zip(dims, norms, matrices):
            if kind == "euclidean_matrix":
                B = np.array(B, dtype=float)
                if B.shape != (d, d) or not np.allclose(B, B.T):
                    raise ValueError("B_i must be a symmetric p_i x p_i matrix")
                np.linalg.cholesky(B)  # raises LinAlgError unless positive definite
                B.setflags(write=False)
                checked.append(B)
            else:
                checked.append(None)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "norms", norms)
        object.__setattr__(self, "matrices", tuple(checked))
        offsets = tuple(np.concatenate([[0], np.cumsum(dims)]).tolist())
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "_slices", tuple(slice(a, b) for a, b in zip(offsets[:-1], offsets[1:])))

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def p(self) -> int:
        return self.offsets[-1]

    @property
    def p_max(self) -> int:
        return max(self.dims)

    def span(self, i: int) -> slice:
        if i < 0:
            raise IndexError(f"block index {i} out of range for {self.n} blocks")
        try:
            return self._slices[i]
        except IndexError:
            raise IndexError(f"block index {i} out of range for {self.n} blocks") from None

    def check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"block index {i} out of range for {self.n} blocks")

    def with_weights(self, weights: Sequence[float]) -> "BlockStructure":
        return BlockStructure(self.dims, tuple(weights), self.norms, self.matrices)

    def __eq__(self, other):
        if not isinstance(other, BlockStructure):
            return NotImplemented
        if (self.dims, self.weights, self.norms) != (other.dims, other.weights, other.norms):
            return False
        return all(
            (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))
            for a, b in zip(self.matrices, other.matrices)
        )

    def __hash__(self):
        return hash((self.dims, self.weights, self.norms))


def _frozen(data) -> np.ndarray:
    arr = np.array(data, dtype=float)
    arr.setflags(write=False)
    return arr


class _BlockVector:
    __slots__ = ("structure", "data")

    def __init__(self, structure: BlockStructure, data):
        arr = _frozen(data).reshape(-1)
        if arr.size != structure.p:
            raise StructureMismatch(f"expected {structure.p} coordinates, got {arr.size}")
        self.structure = structure
        self.data = arr

    @classmethod
    def zeros(cls, structure: BlockStructure):
        return cls(structure, np.zeros(structure.p))

    @classmethod
    def from_blocks(cls, structure: BlockStructure, blocks: Iterable):
        blocks = [np.asarray(b, dtype=float).reshape(-1) for b in blocks]
        if len(blocks) != structure.n:
            raise StructureMismatch("wrong number of blocks")
        for d, b in zip(structure.dims, blocks):
            if b.size != d:
                raise StructureMismatch(f"block of size {b.size} where {d} expected")
        return cls(structure, np.concatenate(blocks))

    def block(self, i: int) -> np.ndarray:
        return self.data[self.structure.span(i)]

    def blocks(self) -> list[np.ndarray]:
        return [self.block(i) for i in range(self.structure.n)]

    def _coerce(self, other) -> np.ndarray:
        if type(other) is not type(self):
            return NotImplemented
        if other.structure is not self.structure and other.structure != self.structure:
            raise StructureMismatch("vectors live in different spaces")
        return other.data

    def __add__(self, other):
        d = self._coerce(other)
        if d is NotImplemented:
            return NotImplemented
        return type(self)(self.structure, self.data + d)

    def __sub__(self, other):
        d = self._coerce(other)
        if d is NotImplemented:
            return NotImplemented
        return type(self)(self.structure, self.data - d)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return type(self)(self.structure, self.data * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return type(self)(self.structure, self.data / scalar)

    def __neg__(self):
        return type(self)(self.structure, -self.data)

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return self.structure == other.structure and np.array_equal(self.data, other.data)

    __hash__ = None

    def __repr__(self):
        return f"{type(self).__name__}({[b.tolist() for b in self.blocks()]})"


class BlockPoint(_BlockVector):
    """Primal vector ``x = sum_i U_i x^(i)``."""


class BlockDual(_BlockVector):
    """Dual (gradient-like) vector ``g = sum_i U~_i g^(i)``."""


class SparseBlockDual:
    """Dual vector that is zero outside ``support``.

    ``values`` holds one array per supported block, in the order of
    ``support``. A vector with full support built by :meth:`from_flat`
    keeps its flat array and creates the block views lazily.
    """

    __slots__ = ("structure", "support", "_values", "_flat")

    def __init__(self, structure: BlockStructure, support: Sequence[int], values: Sequence):
        support = tuple(int(i) for i in support)
        if not support:
            raise ValueError("support must be non-empty")
        if len(set(support)) != len(support):
            raise ValueError("duplicate block in support")
        if len(values) != len(support):
            raise StructureMismatch("one value array per supported block")
        vals = []
        for i, v in zip(support, values):
            structure.check_index(i)
            v = _frozen(v).reshape(-1)
            if v.size != structure.dims[i]:
                raise StructureMismatch(f"block {i} needs {structure.dims[i]} entries, got {v.size}")
            vals.append(v)
        self.structure = structure
        self.support = support
        self._values = tuple(vals)
        self._flat = None

    @classmethod
    def from_flat(cls, structure: BlockStructure, data) -> "SparseBlockDual":
        """Full-support vector from a flat coordinate array."""
        arr = _frozen(data).reshape(-1)
        if arr.size != structure.p:
            raise StructureMismatch(f"expected {structure.p} coordinates, got {arr.size}")
        out = cls.__new__(cls)
        out.structure = structure
        out.support = tuple(range(structure.n))
        out._values = None
        out._flat = arr
        return out

    @classmethod
    def from_dense(cls, g: BlockDual) -> "SparseBlockDual":
        return cls.from_flat(g.structure, g.data)

    @property
    def values(self) -> tuple:
        if self._values is None:
            self._values = tuple(self._flat[sl] for sl in self.structure._slices)
        return self._values

    @property
    def full(self) -> bool:
        return len(self.support) == self.structure.n

    def block(self, i: int) -> np.ndarray:
        self.structure.check_index(i)
        if self._flat is not None:
            return self._flat[self.structure.span(i)]
        try:
            return self.values[self.support.index(i)]
        except ValueError:
            return np.zeros(self.structure.dims[i])

    def items(self):
        return zip(self.support, self.values)

    def flat(self) -> np.ndarray:
        if self._flat is not None:
            return self._flat
        out = np.zeros(self.structure.p)
        for i, v in self.items():
            out[self.structure.span(i)] = v
        return out

    def dense(self) -> BlockDual:
        return BlockDual(self.structure, self.flat())

    def scaled(self, c: float) -> "SparseBlockDual":
        if self._flat is not None:
            return SparseBlockDual.from_flat(self.structure, c * self._flat)
        return SparseBlockDual(self.structure, self.support, [c * v for v in self.values])

    def __sub__(self, other: "SparseBlockDual") -> BlockDual:
        return BlockDual(self.structure, self.flat() - other.flat())

    def __repr__(self):
        return f"SparseBlockDual(support={self.support}, values={[v.tolist() for v in self.values]})"


def embed(structure: BlockStructure, i: int, v) -> BlockPoint:
    """Primal partition operator ``U_i``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != structure.dims[_checked(structure, i)]:
        raise StructureMismatch(f"block {i} has dimension {structure.dims[i]}, got {v.size}")
    out = np.zeros(structure.p)
    out[structure.span(i)] = v
    return BlockPoint(structure, out)


def extract(i: int, g: BlockDual | BlockPoint | SparseBlockDual) -> np.ndarray:
    """Adjoint ``U_i^T``: the i-th block of ``g`` (a copy)."""
    return np.array(g.block(i))


def dual_embed(structure: BlockStructure, i: int, g_i) -> SparseBlockDual:
    """Dual partition operator ``U~_i``; the result is supported on ``{i}``."""
    _checked(structure, i)
    return SparseBlockDual(structure, (i,), (g_i,))


def _checked(structure: BlockStructure, i: int) -> int:
    structure.check_index(i)
    return i


def pairing(g: BlockDual | SparseBlockDual, x: BlockPoint) -> float:
    """``<g, x> = sum_i <g^(i), x^(i)>``, summed block by block left to right."""
    if g.structure is not x.structure and g.structure != x.structure:
        raise StructureMismatch("dual and primal vectors live in different spaces")
    total = 0.0
    if isinstance(g, SparseBlockDual):
        for i in sorted(g.support):
            total += float(np.dot(g.block(i), x.block(i)))
    else:
        for i in range(g.structure.n):
            total += float(np.dot(g.block(i), x.block(i)))
    return total


def block_norm(structure: BlockStructure, i: int, v) -> float:
    """Norm ``||v||_i`` of a vector in ``E_i``."""
    kind = structure.norms[i]
    v = np.asarray(v, dtype=float)
    if kind == "l1":
        return float(np.sum(np.abs(v)))
    if kind == "euclidean_matrix":
        return float(np.sqrt(v @ structure.matrices[i] @ v))
    return float(np.sqrt(np.dot(v, v)))


def block_dual_norm(structure: BlockStructure, i: int, g) -> float:
    """Dual norm ``||g||_{i,*}``: l2 -> l2, l1 -> max-norm, B -> B^{-1}."""
    kind = structure.norms[i]
    g = np.asarray(g, dtype=float)
    if kind == "l1":
        return float(np.max(np.abs(g))) if g.size else 0.0
    if kind == "euclidean_matrix":
        return float(np.sqrt(g @ np.linalg.solve(structure.matrices[i], g)))
    return float(np.sqrt(np.dot(g, g)))


def primal_norm(x: BlockPoint) -> float:
    """``||x||_E = sqrt(sum_i beta_i ||x^(i)||_i^2)``."""
    s = x.structure
    total = 0.0
    for i in range(s.n):
        total += s.weights[i] * block_norm(s, i, x.block(i)) ** 2
    return float(np.sqrt(total))


def dual_norm(g: BlockDual | SparseBlockDual) -> float:
    """``||g||_{E,*} = sqrt(sum_i ||g^(i)||_{i,*}^2 / beta_i)``."""
    s = g.structure
    idx = sorted(g.support) if isinstance(g, SparseBlockDual) else range(s.n)
    total = 0.0
    for i in idx:
        total += block_dual_norm(s, i, g.block(i)) ** 2 / s.weights[i]
    return float(np.sqrt(total))
