import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simtri.block_space import BlockDual, BlockPoint, dual_norm
from simtri.problems import (
    NoisyValueOracle,
    audit_block_lipschitz,
    audit_smoothness,
    chain_matrix,
    grad_check,
    make_chain_quadratic,
    make_coupled_quadratic,
    make_separable_quadratic,
    make_simplex_quadratic,
    noisy_value,
)
from simtri.verify import box_instance, coupled_instance, simplex_instance


def test_separable_examples():
    p = make_separable_quadratic([1.0, 4.0], np.zeros(2))
    assert p.f_star == 0.0 and np.array_equal(p.x_star.data, [0.0, 0.0])
    assert p.lipschitz == (1.0, 4.0)
    box = make_separable_quadratic([1.0], np.array([2.0]), lower=0.0, upper=1.0)
    assert box.x_star.data.tolist() == [1.0] and box.f_star == pytest.approx(0.5)
    c = np.array([0.3, -1.2])
    q = make_separable_quadratic([1.0, 4.0], c)
    assert np.array_equal(q.grad(c).data, [0.0, 0.0])


def test_separable_rejects_bad_constants():
    with pytest.raises(ValueError):
        make_separable_quadratic([1.0, 0.0], np.zeros(2))


def test_coupled_examples():
    ident = make_coupled_quadratic(np.eye(3), np.zeros(3))
    assert ident.lipschitz == (1.0, 1.0, 1.0) and ident.f_star == 0.0
    p = make_coupled_quadratic(np.array([[2.0, 1.0], [1.0, 2.0]]), np.array([1.0, 1.0]))
    assert np.allclose(p.x_star.data, [1 / 3, 1 / 3], atol=1e-15)
    assert p.f_star == pytest.approx(-1 / 3)
    assert p.lipschitz == (2.0, 2.0)
    assert p.global_lipschitz == pytest.approx(3.0)


def test_coupled_rejects_indefinite():
    with pytest.raises(ValueError):
        make_coupled_quadratic(np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros(2))
    with pytest.raises(ValueError):
        make_coupled_quadratic(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2))


def test_simplex_examples():
    b = np.array([0.2, 0.8, 0.5, 0.5])
    p = make_simplex_quadratic(np.eye(4), b, (2, 2))
    assert np.allclose(p.x_star.data, b, atol=1e-7)
    assert p.f_star == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(11)
    M = rng.standard_normal((6, 4))
    b2 = rng.standard_normal(6)
    one = make_simplex_quadratic(M, b2, (2, 2))
    two = make_simplex_quadratic(M, b2, (2, 2))
    assert one.f_star == two.f_star
    assert one.frank_wolfe_gap(one.x_star) <= one.optimum_tol


def test_simplex_lipschitz_matches_power_iteration():
    rng = np.random.default_rng(12)
    M = rng.standard_normal((8, 6))
    p = make_simplex_quadratic(M, rng.standard_normal(8), (3, 3))
    for i, sl in enumerate([slice(0, 3), slice(3, 6)]):
        G = M[:, sl].T @ M[:, sl]
        v = np.ones(3)
        for _ in range(500):
            v = G @ v
            v /= np.linalg.norm(v)
        assert p.lipschitz[i] == pytest.approx(v @ G @ v, rel=1e-10)


def test_stored_optima_are_stationary():
    for prob in (coupled_instance((2, 2, 1), seed=3), make_separable_quadratic([2.0, 5.0], np.array([1.0, -1.0]))):
        assert dual_norm(prob.grad(prob.x_star)) <= 1e-10
    simplex = simplex_instance(3, 3, seed=4)
    assert simplex.frank_wolfe_gap(simplex.x_star) <= 1e-8


def test_chain_instance():
    A = chain_matrix(5).toarray()
    assert np.array_equal(np.diag(A), [2.0] * 5) and np.array_equal(np.diag(A, 1), [-1.0] * 4)
    p = make_chain_quadratic(64, (16,) * 4)
    assert dual_norm(p.grad(p.x_star)) <= 1e-8
    assert all(L <= 4.0 for L in p.lipschitz)


def test_dir_deriv_and_block_grad_agree_with_grad():
    prob = coupled_instance((2, 3), seed=5)
    rng = np.random.default_rng(6)
    x = rng.standard_normal(5)
    e = rng.standard_normal(5)
    g = prob.grad(x).data
    assert prob.dir_deriv(x, e) == pytest.approx(g @ e)
    assert np.allclose(np.concatenate([prob.block_grad(0, x), prob.block_grad(1, x)]), g)


def test_noisy_value_examples():
    prob = box_instance(4, seed=1)
    x = np.full(4, 0.5)
    f = prob.value(x)
    assert noisy_value(NoisyValueOracle(prob), x) == f
    rng = np.random.default_rng(0)
    uni = NoisyValueOracle(prob, 1e-6, "uniform")
    assert all(abs(uni.value(x, rng) - f) <= 1e-6 for _ in range(1000))
    adv = NoisyValueOracle(prob, 1e-6, "adversarial")
    tau = 1e-3
    e = np.array([1.0, 0, 0, 0])
    fd_noisy = (adv.value(x + tau * e, side=1) - adv.value(x, side=-1)) / tau
    fd_exact = (prob.value(x + tau * e) - f) / tau
    assert fd_noisy - fd_exact == pytest.approx(2e-6 / tau, rel=1e-6)
    with pytest.raises(ValueError):
        NoisyValueOracle(prob, 1e-6, "gaussian")


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-14, 1.0), st.floats(-1e8, 1e8), st.sampled_from(["uniform", "adversarial"]), st.integers(0, 2**32 - 1))
def test_noisy_value_never_exceeds_level(level, shift, model, seed):
    prob = make_separable_quadratic([1.0], np.array([shift]))
    oracle = NoisyValueOracle(prob, level, model)
    rng = np.random.default_rng(seed)
    x = np.array([rng.normal()])
    f = prob.value(x)
    for side in (1, -1):
        assert abs(oracle.value(x, rng, side) - f) <= level


def test_grad_check_examples():
    rng = np.random.default_rng(7)
    prob = make_separable_quadratic(rng.uniform(1, 5, 6), rng.standard_normal(6))
    assert grad_check(prob, rng.standard_normal(6), h=1e-5).passed
    linear = make_coupled_quadratic(np.eye(3) * 1e-300, np.array([1.0, -2.0, 3.0]))
    rep = grad_check(linear, rng.standard_normal(3))
    assert rep.max_rel_error <= 1e-9

    def corrupted(x):
        g = prob.grad(x).data.copy()
        g[4] += 1.0
        return g

    bad = grad_check(prob, rng.standard_normal(6), grad=corrupted)
    assert not bad.passed and bad.worst_coordinate == 4
    assert "coordinate 4" in str(bad)


@pytest.mark.parametrize("prob", [
    coupled_instance((2, 2, 1), seed=8),
    simplex_instance(3, 3, seed=9),
    box_instance(5, seed=10),
    make_chain_quadratic(32, (8,) * 4),
], ids=["coupled", "simplex", "separable", "chain"])
def test_smoothness_audits(prob):
    rng = np.random.default_rng(13)
    assert audit_block_lipschitz(prob, rng, samples=1000) <= 1 + 1e-10
    assert audit_smoothness(prob, rng, samples=1000) <= 1e-12


def test_values_accept_block_points():
    prob = coupled_instance((2, 1), seed=14)
    x = BlockPoint(prob.structure, [0.1, 0.2, 0.3])
    assert prob.value(x) == prob.value(x.data)
    assert isinstance(prob.grad(x), BlockDual)
