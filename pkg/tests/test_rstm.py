import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simtri.block_space import BlockPoint
from simtri.oracles import OracleConfig, setup_for
from simtri.problems import make_separable_quadratic
from simtri.rstm import (
    RunConfig,
    coefficients,
    delta_schedule,
    gamma_table,
    init_state,
    iterate,
    iterations_for_accuracy,
    coefficient_bounds,
    next_coefficients,
    reference_solve,
    solve,
    theoretical_bound,
)
from simtri.verify import box_instance, coupled_instance, feasibility_violation, simplex_instance


def test_init_state_examples():
    u0 = BlockPoint(setup_for(box_instance(2), "coord").structure, [0.0, 0.0])
    assert init_state(2, u0).A == 0.5
    assert init_state(1, u0).A == 0.0
    assert init_state(10, u0).A == pytest.approx(0.9)
    with pytest.raises(ValueError):
        init_state(0.5, u0)


def test_next_coefficients_examples():
    assert next_coefficients(0.5, 2) == (0.5, 1.0)
    a, A = next_coefficients(1.0, 2)
    assert a == pytest.approx((1 + math.sqrt(17)) / 8) and A == pytest.approx(1.6403882, abs=1e-7)
    assert next_coefficients(0.0, 1) == (1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(1.0, 1000.0), st.integers(1, 2000))
def test_coefficient_identities(rho, K):
    alpha, A = coefficients(K, rho)
    assert np.all(np.abs(A[1:] - rho**2 * alpha[1:] ** 2) <= 1e-12 * A[1:])
    lo, hi = coefficient_bounds(np.arange(1, K + 1), rho)
    assert np.all(A[1:] >= lo * (1 - 1e-12)) and np.all(A[1:] <= hi * (1 + 1e-12))
    ratio = alpha[1:] / A[1:]
    assert np.all(np.diff(ratio) <= 1e-15) and np.all(ratio <= 1 / rho + 1e-15)


def test_gamma_examples():
    assert gamma_table(0, 3).coefficients.tolist() == [1.0]
    assert gamma_table(1, 7).coefficients.tolist() == [0.0, 1.0]
    t = gamma_table(5, 3)
    assert np.all(t.coefficients >= 0) and abs(t.total - 1) <= 1e-12
    with pytest.raises(ValueError):
        gamma_table(-1, 2)


def test_gamma_reconstructs_iterates():
    prob = coupled_instance((2, 2), seed=1)
    cfg = RunConfig(prob, OracleConfig("block"), iters=30, seed=2)
    us = [cfg.u0.data]
    xs = []
    solve(cfg, callback=lambda st_, smp: (us.append(st_.u.data), xs.append(st_.x.data)))
    for k in (1, 5, 30):
        g = gamma_table(k, cfg.rho).coefficients
        assert np.allclose(g @ np.array(us[: k + 1]), xs[k - 1], atol=1e-10)


def test_schedule_and_budget_examples():
    assert delta_schedule(0, 1.0, 2.0, 1.0) == 0.125
    assert delta_schedule(0, 1.0, 2.0, 2.0) == 0.0625
    assert delta_schedule(0, 4.0, 10.0, 25.0) == pytest.approx(0.004)
    with pytest.raises(ValueError):
        delta_schedule(0, 0.0, 2.0, 1.0)
    assert iterations_for_accuracy(6.0, 1.0, 1.0) == 0
    assert iterations_for_accuracy(0.06, 1.0, 10.0) == 81
    k1 = iterations_for_accuracy(1e-4, 1.0, 1.0)
    k2 = iterations_for_accuracy(0.25e-4, 1.0, 1.0)
    assert k2 / k1 == pytest.approx(2.0, rel=0.01)


def test_theoretical_bound_examples():
    assert theoretical_bound(3, 3.0, 1.0, 2.0, 0.0, "controlled") == 0.5
    assert theoretical_bound(3, 4.0, 1.5, 2.0, 0.0, "uncontrolled") == pytest.approx(2 * 2.25 / 4)
    assert theoretical_bound(1, 1.0, 1.0, 2.0, 0.1, "uncontrolled") == pytest.approx(2.16)
    assert theoretical_bound(0, 0.5, 1.0, 2.0, 0.1, "uncontrolled") == math.inf
    with pytest.raises(ValueError):
        theoretical_bound(1, 1.0, 1.0, 2.0, 0.1, "wild")


def test_one_step_hand_trace():
    prob = make_separable_quadratic([1.0], np.zeros(1))
    setup = setup_for(prob, "full")
    u0 = BlockPoint(setup.structure, [1.0])
    state, _ = iterate(init_state(1.0, u0), setup, prob, OracleConfig("full"), np.random.default_rng(0), rho=1.0)
    assert state.y.data.tolist() == [1.0]
    assert state.u.data.tolist() == [0.0]
    assert state.x.data.tolist() == [0.0]
    assert (state.alpha, state.A) == (1.0, 1.0)


def test_stationary_start_is_fixed_point():
    prob = make_separable_quadratic([1.0, 2.0], np.array([0.3, -0.2]))
    cfg = RunConfig(prob, OracleConfig("coord"), u0=BlockPoint(prob.structure, [0.3, -0.2]), iters=20)
    tr = solve(cfg)
    # the convex combination y = (alpha u + A x) / A' only rounds
    assert np.allclose(tr.final.x.data, [0.3, -0.2], rtol=0, atol=1e-15)
    assert np.allclose(tr.final.u.data, [0.3, -0.2], rtol=0, atol=1e-15)
    assert tr.final.k == 20


def test_coordinate_step_is_sparse():
    prob = coupled_instance((1,) * 5, seed=3)
    cfg = RunConfig(prob, OracleConfig("coord"), iters=40, seed=4)
    prev = [cfg.u0.data]

    def cb(state, sample):
        changed = np.flatnonzero(state.u.data != prev[0])
        assert set(changed) <= {sample.block}
        prev[0] = state.u.data

    solve(cfg, callback=cb)


def test_solve_examples():
    prob = coupled_instance((2, 2), seed=5)
    tr = solve(RunConfig(prob, OracleConfig("block"), iters=0))
    assert len(tr) == 1 and tr.k == [0]
    det = solve(RunConfig(prob, OracleConfig("full"), iters=100))
    assert det.rho == 1.0
    assert det.residual[100] <= theoretical_bound(100, det.A[100], det.P0, 1.0, 0.0, "controlled")


def test_solve_errors():
    simplex = simplex_instance(2, 3, seed=6)
    with pytest.raises(ValueError):
        RunConfig(simplex, OracleConfig("dir"), iters=5)
    with pytest.raises(ValueError):
        RunConfig(simplex, OracleConfig("block"), iters=5, u0=BlockPoint(simplex.structure, [1.0, 0, 0, 1 / 3, 1 / 3, 1 / 3]))
    with pytest.raises(ValueError):
        RunConfig(simplex, OracleConfig("block"))
    with pytest.raises(ValueError):
        RunConfig(simplex, OracleConfig("block"), iters=5, rho=0.5)


def test_target_accuracy_stopping():
    prob = make_separable_quadratic([1.0, 2.0, 3.0], np.array([1.0, -1.0, 0.5]))
    cfg = RunConfig(prob, OracleConfig("coord"), epsilon=1e-3, seed=1)
    tr = solve(cfg)
    assert tr.stopping == "target_accuracy"
    assert len(tr) == iterations_for_accuracy(1e-3, cfg.P0, cfg.rho) + 1


def test_same_seed_same_trace():
    prob = simplex_instance(3, 3, seed=7)
    runs = [solve(RunConfig(prob, OracleConfig("block", level=1e-3, noise="uniform"), iters=50, seed=9)) for _ in range(2)]
    assert runs[0].f == runs[1].f and runs[0].support == runs[1].support


@pytest.mark.parametrize("schedule", ["horizon", "per_step"])
def test_controlled_regime_respects_schedule(schedule):
    prob = box_instance(4, seed=8)
    cfg = RunConfig(prob, OracleConfig("coord", noise="adversarial"), iters=60, regime="controlled", schedule=schedule)
    tr = solve(cfg)
    for k in range(1, len(tr)):
        assert tr.delta[k] <= delta_schedule(k, cfg.P0, cfg.rho, tr.A[k]) * (1 + 1e-12)


@pytest.mark.parametrize("variant", ["block", "full", "df_block"])
def test_iterates_stay_feasible(variant):
    prob = simplex_instance(4, 3, seed=10)
    tau = "optimal" if variant.startswith("df_") else None
    cfg = RunConfig(prob, OracleConfig(variant, level=1e-6, noise="uniform", tau=tau), iters=200, seed=11)
    worst = [0.0]

    def cb(state, sample):
        for pt in (state.x, state.y, state.u):
            worst[0] = max(worst[0], feasibility_violation(cfg.setup, pt))

    solve(cfg, callback=cb)
    assert worst[0] <= 1e-10


def test_reference_solve_reaches_gap():
    prob = simplex_instance(3, 3, seed=12)
    x = reference_solve(prob, prob.setup(), target_gap=1e-11)
    assert prob.frank_wolfe_gap(x) <= 1e-11
