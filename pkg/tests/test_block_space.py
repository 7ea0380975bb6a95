import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simtri.block_space import (
    BlockDual,
    BlockPoint,
    BlockStructure,
    SparseBlockDual,
    StructureMismatch,
    dual_embed,
    dual_norm,
    embed,
    extract,
    pairing,
    primal_norm,
)


def scalar(n, weights=None):
    return BlockStructure((1,) * n, weights or (1.0,) * n)


def test_structure_validation():
    with pytest.raises(ValueError):
        BlockStructure((), ())
    with pytest.raises(ValueError):
        BlockStructure((1, 0), (1.0, 1.0))
    with pytest.raises(ValueError):
        BlockStructure((1,), (0.0,))
    with pytest.raises(ValueError):
        BlockStructure((2,), (1.0,), ("euclidean_matrix",), (np.array([[1.0, 2.0], [2.0, 1.0]]),))
    s = BlockStructure((2, 3, 1), (1.0, 2.0, 3.0))
    assert s.p == 6 and s.n == 3 and s.p_max == 3


def test_embed_examples():
    assert np.array_equal(embed(scalar(3), 1, [5.0]).data, [0, 5, 0])
    s = BlockStructure((2, 1), (1.0, 1.0))
    assert np.array_equal(embed(s, 0, [1.0, 2.0]).data, [1, 2, 0])
    assert embed(s, 0, np.zeros(2)) == BlockPoint.zeros(s)


def test_embed_errors():
    s = BlockStructure((2, 1), (1.0, 1.0))
    with pytest.raises(IndexError):
        embed(s, 2, [1.0])
    with pytest.raises(IndexError):
        embed(s, -1, [1.0, 2.0])
    with pytest.raises(StructureMismatch):
        embed(s, 0, [1.0])


def test_extract_examples():
    s = BlockStructure((2, 1), (1.0, 1.0))
    g = BlockDual.from_blocks(s, [np.array([1.0, 2.0]), np.array([3.0])])
    assert np.array_equal(extract(1, g), [3.0])
    assert np.array_equal(extract(0, BlockDual.zeros(s)), [0.0, 0.0])
    with pytest.raises(IndexError):
        extract(5, g)


def test_dual_embed_examples():
    sp = dual_embed(scalar(2), 0, [7.0])
    assert sp.support == (0,)
    assert np.array_equal(sp.block(0), [7.0])
    assert np.array_equal(dual_embed(scalar(3), 1, [3.0]).dense().data, [0, 3, 0])


def test_pairing_examples():
    s = scalar(2)
    g = BlockDual(s, [1.0, 2.0])
    assert pairing(g, BlockPoint(s, [3.0, 4.0])) == 11.0
    assert pairing(g, BlockPoint.zeros(s)) == 0.0
    assert pairing(dual_embed(s, 1, [5.0]), BlockPoint(s, [9.0, 2.0])) == 10.0
    with pytest.raises(StructureMismatch):
        pairing(g, BlockPoint.zeros(scalar(3)))


def test_norm_examples():
    s = BlockStructure((1, 1), (1.0, 4.0))
    assert primal_norm(BlockPoint(s, [3.0, 1.0])) == pytest.approx(math.sqrt(13))
    assert primal_norm(BlockPoint.zeros(s)) == 0.0
    l1 = BlockStructure((2,), (2.0,), ("l1",))
    assert primal_norm(BlockPoint(l1, [1.0, -1.0])) == pytest.approx(2 * math.sqrt(2))
    assert dual_norm(BlockDual(BlockStructure((1,), (4.0,)), [2.0])) == pytest.approx(1.0)
    assert dual_norm(BlockDual.zeros(s)) == 0.0
    assert dual_norm(BlockDual(BlockStructure((2,), (1.0,), ("l1",)), [3.0, -5.0])) == pytest.approx(5.0)


def test_matrix_norm_is_dual_pair():
    B = np.array([[2.0, 0.5], [0.5, 1.0]])
    s = BlockStructure((2,), (3.0,), ("euclidean_matrix",), (B,))
    x = BlockPoint(s, [1.0, -2.0])
    assert primal_norm(x) ** 2 == pytest.approx(3.0 * x.data @ B @ x.data)
    g = BlockDual(s, [0.3, 0.7])
    assert dual_norm(g) ** 2 == pytest.approx(g.data @ np.linalg.solve(B, g.data) / 3.0)


def test_sparse_dual_views():
    s = BlockStructure((2, 1, 3), (1.0, 1.0, 1.0))
    sp = SparseBlockDual(s, (2,), [np.array([1.0, 2.0, 3.0])])
    assert np.array_equal(sp.block(0), [0.0, 0.0])
    assert np.array_equal(sp.dense().data, [0, 0, 0, 1, 2, 3])
    assert not sp.full
    full = SparseBlockDual.from_flat(s, np.arange(6.0))
    assert full.full and np.array_equal(full.block(2), [3.0, 4.0, 5.0])
    assert np.array_equal(full.scaled(2.0).flat(), 2 * np.arange(6.0))
    with pytest.raises(ValueError):
        SparseBlockDual(s, (1, 1), [np.ones(1), np.ones(1)])


def test_values_are_immutable():
    s = scalar(2)
    x = BlockPoint(s, [1.0, 2.0])
    with pytest.raises(ValueError):
        x.data[0] = 5.0


structures = st.lists(st.integers(1, 4), min_size=1, max_size=5).flatmap(
    lambda dims: st.tuples(
        st.just(tuple(dims)),
        st.lists(st.floats(0.1, 10.0), min_size=len(dims), max_size=len(dims)),
        st.lists(st.sampled_from(["euclidean", "l1"]), min_size=len(dims), max_size=len(dims)),
        st.integers(0, 2**32 - 1),
    )
)


@settings(max_examples=200, deadline=None)
@given(structures)
def test_cauchy_schwarz(case):
    dims, weights, norms, seed = case
    s = BlockStructure(dims, tuple(weights), tuple(norms))
    rng = np.random.default_rng(seed)
    g = BlockDual(s, rng.standard_normal(s.p))
    x = BlockPoint(s, rng.standard_normal(s.p))
    assert abs(pairing(g, x)) <= dual_norm(g) * primal_norm(x) * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(structures)
def test_adjointness_and_decomposition(case):
    dims, weights, norms, seed = case
    s = BlockStructure(dims, tuple(weights), tuple(norms))
    rng = np.random.default_rng(seed)
    x = BlockPoint(s, rng.standard_normal(s.p))
    total = BlockPoint.zeros(s)
    for i in range(s.n):
        v = rng.standard_normal(dims[i])
        assert pairing(dual_embed(s, i, v), x) == float(np.dot(v, x.block(i)))
        assert np.array_equal(extract(i, dual_embed(s, i, v)), v)
        total = total + embed(s, i, x.block(i))
    assert np.array_equal(total.data, x.data)
