import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simtri.block_space import BlockPoint, SparseBlockDual, dual_embed, primal_norm
from simtri.oracles import OracleConfig, draw, setup_for
from simtri.problems import make_separable_quadratic
from simtri.prox import (
    BlockSet,
    InfeasiblePointError,
    bregman,
    make_setup,
    prox_map,
    prox_objective,
    prox_regularity_check,
    prox_value,
)
from simtri.verify import coupled_instance, random_point, simplex_instance


def euclid(d=1, beta=1.0):
    return make_setup([BlockSet("free")], (d,), (beta,))


def entropy(d=2, beta=1.0):
    return make_setup([BlockSet("simplex")], (d,), (beta,))


def test_setup_norms_follow_sets():
    s = make_setup([BlockSet("free"), BlockSet("simplex"), BlockSet.box(0.0, 1.0)], (2, 3, 1), (1.0, 2.0, 3.0))
    assert s.structure.norms == ("euclidean", "l1", "euclidean")
    with pytest.raises(ValueError):
        BlockSet.box(1.0, 0.0)
    with pytest.raises(ValueError):
        BlockSet("matrix")


def test_prox_value_examples():
    assert prox_value(euclid(2), BlockPoint(euclid(2).structure, [3.0, 4.0])) == pytest.approx(12.5)
    s = entropy(2)
    assert prox_value(s, BlockPoint(s.structure, [0.5, 0.5])) == pytest.approx(math.log(0.5))
    s2 = entropy(2, beta=2.0)
    assert prox_value(s2, BlockPoint(s2.structure, [1.0, 0.0])) == 0.0
    assert prox_value(s2, BlockPoint(s2.structure, [1 - 1e-12, 1e-12])) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(InfeasiblePointError):
        prox_value(s, BlockPoint(s.structure, [0.7, 0.7]))


def test_bregman_examples():
    s = euclid()
    assert bregman(s, BlockPoint(s.structure, [0.0]), BlockPoint(s.structure, [2.0])) == pytest.approx(2.0)
    e = entropy(2)
    kl = (1 / 3) * math.log(2 / 3) + (2 / 3) * math.log(4 / 3)
    assert bregman(e, BlockPoint(e.structure, [0.5, 0.5]), BlockPoint(e.structure, [1 / 3, 2 / 3])) == pytest.approx(kl)
    assert kl == pytest.approx(0.056633, abs=1e-6)
    with pytest.raises(InfeasiblePointError):
        bregman(e, BlockPoint(e.structure, [1.0, 0.0]), BlockPoint(e.structure, [0.5, 0.5]))


def test_bregman_self_is_zero():
    rng = np.random.default_rng(0)
    prob = simplex_instance(3, 3, seed=1)
    s = prob.setup()
    for _ in range(20):
        z = random_point(s, rng)
        assert bregman(s, z, z) == pytest.approx(0.0, abs=1e-15)


def test_prox_map_examples():
    s = euclid()
    out = prox_map(s, BlockPoint(s.structure, [0.0]), 1.0, dual_embed(s.structure, 0, [3.0]))
    assert out.data.tolist() == [-3.0]
    e = entropy(2)
    out = prox_map(e, BlockPoint(e.structure, [0.5, 0.5]), 1.0, dual_embed(e.structure, 0, [math.log(2), 0.0]))
    assert np.allclose(out.data, [1 / 3, 2 / 3], atol=1e-15)
    b = make_setup([BlockSet.box(0.0, 1.0)], (1,), (1.0,))
    out = prox_map(b, BlockPoint(b.structure, [0.5]), 1.0, dual_embed(b.structure, 0, [3.0]))
    assert out.data.tolist() == [0.0]


def test_prox_map_errors():
    s = euclid()
    with pytest.raises(ValueError):
        prox_map(s, BlockPoint(s.structure, [0.0]), 0.0, dual_embed(s.structure, 0, [1.0]))
    e = entropy(2)
    with pytest.raises(InfeasiblePointError):
        prox_map(e, BlockPoint(e.structure, [1.0, 0.0]), 1.0, dual_embed(e.structure, 0, [1.0, 0.0]))


def test_entropy_prox_matches_grid_search():
    e = entropy(2)
    u = BlockPoint(e.structure, [0.5, 0.5])
    g = dual_embed(e.structure, 0, [math.log(2), 0.0])
    out = prox_map(e, u, 1.0, g)
    grid = np.linspace(1e-9, 1 - 1e-9, 200_001)
    vals = [prox_objective(e, u, 1.0, g, BlockPoint(e.structure, [t, 1 - t])) for t in grid[::1000]]
    best = grid[::1000][int(np.argmin(vals))]
    assert abs(out.data[0] - best) < 5e-3
    assert prox_objective(e, u, 1.0, g, out) <= min(vals) + 1e-12


def test_entropy_prox_overflow_safe():
    e = entropy(3)
    u = BlockPoint(e.structure, [0.2, 0.3, 0.5])
    out = prox_map(e, u, 1.0, dual_embed(e.structure, 0, [1e6, -1e6, 0.0]))
    assert np.all(out.data > 0) and abs(out.data.sum() - 1) <= 1e-12
    assert out.data[1] == pytest.approx(1.0)


def test_sparsity_is_bit_exact():
    prob = simplex_instance(4, 3, seed=2)
    s = prob.setup()
    rng = np.random.default_rng(3)
    u = random_point(s, rng)
    out = prox_map(s, u, 0.7, dual_embed(s.structure, 2, rng.standard_normal(3)))
    for i in (0, 1, 3):
        assert np.array_equal(out.block(i), u.block(i))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_bregman_lower_bound(seed, beta):
    rng = np.random.default_rng(seed)
    s = make_setup([BlockSet("simplex"), BlockSet("free"), BlockSet.box(-1.0, 1.0)], (3, 2, 2), (beta, 1.0, 2.0))
    z, x = random_point(s, rng), random_point(s, rng)
    assert bregman(s, z, x) >= 0.5 * primal_norm(x - z) ** 2 - 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_entropy_output_in_open_simplex(seed, alpha):
    rng = np.random.default_rng(seed)
    e = entropy(4, beta=float(rng.uniform(0.1, 10)))
    u = random_point(e, rng)
    out = prox_map(e, u, alpha, SparseBlockDual(e.structure, (0,), [10 * rng.standard_normal(4)]))
    assert np.all(out.data > 0) and abs(out.data.sum() - 1) <= 1e-12


@pytest.mark.parametrize("variant", ["coord", "block", "dir"])
def test_prox_regularity_examples(variant):
    rng = np.random.default_rng(4)
    if variant == "block":
        prob = simplex_instance(3, 3, seed=5)
    else:
        prob = coupled_instance((1,) * 5, seed=6)
    setup = setup_for(prob, variant)
    config = OracleConfig(variant)
    tol = 1e-12 if variant == "coord" else 1e-9
    for _ in range(50):
        y, u = random_point(setup, rng), random_point(setup, rng)
        sample = draw(prob, setup, y, config, rng)
        assert prox_regularity_check(setup, prob, y, u, float(rng.uniform(0.01, 2)), sample) <= tol


def test_box_prox_clamps_coordinatewise():
    prob = make_separable_quadratic([1.0, 1.0], np.zeros(2), lower=[0.0, -1.0], upper=[1.0, 0.0])
    s = prob.setup()
    out = prox_map(s, BlockPoint(s.structure, [0.5, -0.5]), 1.0, SparseBlockDual.from_flat(s.structure, [-3.0, -3.0]))
    assert out.data.tolist() == [1.0, 0.0]
