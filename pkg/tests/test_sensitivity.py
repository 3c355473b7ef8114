"""Tests for directional derivatives of QP solution maps."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from semipoison import errors
from semipoison.qp import KktSolution, QpProblem, solve_qp
from semipoison.sensitivity import (
    build_auxiliary,
    check_licq,
    check_ssoc,
    classify_active,
    fd_directional_derivative,
    run_oracle_trials,
    semi_derivative,
    solution_semi_derivative,
)
from semipoison.victims import (
    VictimModel,
    generic_parametric_qp,
    kink_projection_model,
    solve_victim,
    toy_bilevel_model,
)


def test_classify_active_threshold_cases():
    # three inequalities with g = (-0.5, 0, 0) and lam = (0, 1e-9, 2)
    prob = QpProblem(
        np.eye(2), np.zeros(2),
        A_ineq=np.zeros((3, 2)), b_ineq=np.array([-0.5, 0.0, 0.0]),
    )
    sol = KktSolution(y=np.zeros(2), lam=np.array([0.0, 1e-9, 2.0]), value=0.0)
    st = classify_active(prob, sol)
    assert st.active == [1, 2]
    assert st.weakly_active == [1]
    assert st.strict == [2]


def test_classify_active_includes_equalities():
    prob = QpProblem(np.eye(2), np.zeros(2), A_eq=np.array([[1.0, 0.0]]), b_eq=np.zeros(1))
    sol = KktSolution(y=np.zeros(2), lam=np.array([0.3]), value=0.0)
    st = classify_active(prob, sol)
    assert st.active == [0]
    assert st.strict == [0]
    assert st.weakly_active == []


def test_check_licq():
    ok, sv = check_licq(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert ok and sv == pytest.approx(1.0)
    ok, _ = check_licq(np.array([[1.0, 2.0], [1.0, 2.0]]))  # duplicated row
    assert not ok
    ok, _ = check_licq(np.array([[1.0], [-1.0]]))  # more rows than variables
    assert not ok
    ok, sv = check_licq(np.zeros((0, 3)))
    assert ok and sv == np.inf


def test_check_ssoc():
    ok, ev = check_ssoc(np.diag([1.0, -1.0]), np.array([[0.0, 1.0]]))
    assert ok and ev == pytest.approx(1.0)  # indefinite, but the bad direction is excluded
    ok, ev = check_ssoc(np.diag([1.0, 0.0]), np.zeros((0, 2)))
    assert not ok and ev == pytest.approx(0.0)
    ok, _ = check_ssoc(np.diag([1.0, 0.0]), np.array([[0.0, 1.0]]))
    assert ok  # the flat direction is excluded
    ok, ev = check_ssoc(np.array([[2.0]]), np.array([[1.0]]))
    assert ok and ev == np.inf  # null space is {0}


def test_kink_auxiliary_data():
    model = kink_projection_model()
    x = np.array([0.0])
    sol = solve_victim(model, x)
    aux = build_auxiliary(model, x, sol)
    assert_allclose(aux.H_aux, [[1.0]])
    assert_allclose(aux.active_rows, [[-1.0]])
    assert_allclose(aux.B, [[-1.0], [0.0]])
    assert aux.structure.active == [0]
    assert aux.structure.weakly_active == [0]
    assert aux.regularity.licq_ok and aux.regularity.ssoc_ok


def test_kink_one_sided_derivatives():
    model = kink_projection_model()
    x = np.array([0.0])
    sol = solve_victim(model, x)
    aux = build_auxiliary(model, x, sol)
    assert semi_derivative(aux, np.array([1.0])).dy[0] == pytest.approx(1.0, abs=1e-12)
    assert semi_derivative(aux, np.array([-1.0])).dy[0] == pytest.approx(0.0, abs=1e-12)


def test_strictly_active_solution_is_insensitive():
    model = kink_projection_model()
    x = np.array([-0.5])
    sol = solve_victim(model, x)
    aux = build_auxiliary(model, x, sol)
    for dx in (1.0, -1.0):
        assert semi_derivative(aux, np.array([dx])).dy[0] == pytest.approx(0.0, abs=1e-12)


def test_unconstrained_reduction_to_implicit_function():
    model = generic_parametric_qp(3, dim_var=4, dim_data=3, n_ineq=0, n_eq=0)
    x = np.zeros(3)
    sol = solve_victim(model, x)
    aux = build_auxiliary(model, x, sol)
    prob = model.assemble(x)
    cross = model.cross_hessian(x, sol.y, np.zeros(0))
    rng = np.random.default_rng(0)
    for _ in range(4):
        dx = rng.standard_normal(3)
        dy = semi_derivative(aux, dx).dy
        assert_allclose(dy, -np.linalg.solve(prob.H, cross @ dx), atol=1e-10)


def test_positive_homogeneity():
    model = generic_parametric_qp(11, dim_var=4, dim_data=3, n_ineq=3)
    x = np.array([0.05, -0.1, 0.02])
    sol = solve_victim(model, x)
    aux = build_auxiliary(model, x, sol)
    dx = np.array([0.3, -0.5, 0.8])
    base = semi_derivative(aux, dx).dy
    for alpha in (0.5, 2.0, 10.0):
        scaled = semi_derivative(aux, alpha * dx).dy
        assert_allclose(scaled, alpha * base, rtol=1e-8, atol=1e-12)
    # the kinked fixture is positively homogeneous too, one side at a time
    km = kink_projection_model()
    ks = solve_victim(km, np.array([0.0]))
    kaux = build_auxiliary(km, np.array([0.0]), ks)
    for alpha in (0.5, 2.0, 10.0):
        assert semi_derivative(kaux, np.array([alpha])).dy[0] == pytest.approx(alpha, rel=1e-12)


def test_oracle_agreement_randomized():
    trials = run_oracle_trials(60, seed=123)
    ok = [t for t in trials if t.status == "ok"]
    assert len(ok) == 60
    worst = max(t.deviation for t in ok)
    assert worst <= 5e-4, f"worst deviation {worst}"


def test_local_lipschitz_bound():
    # max semi-derivative norm over sampled directions bounds difference quotients
    h = 1e-4
    rng = np.random.default_rng(8)
    for seed in (0, 4, 9):
        model = generic_parametric_qp(seed, dim_var=4, dim_data=3, n_ineq=3)
        x = 0.1 * rng.standard_normal(3)
        sol = solve_victim(model, x)
        aux = build_auxiliary(model, x, sol)
        dirs = [rng.standard_normal(3) for _ in range(12)]
        dirs = [d / np.linalg.norm(d) for d in dirs]
        bound = max(np.linalg.norm(semi_derivative(aux, d).dy) for d in dirs)
        for d in dirs:
            quot = np.linalg.norm(solve_victim(model, x + h * d).y - sol.y) / h
            assert quot <= bound + 1e-3


def test_toy_kink_violates_licq():
    model = toy_bilevel_model()
    x = np.array([0.0])
    sol = solve_victim(model, x)
    with pytest.raises(errors.RegularityFailure):
        build_auxiliary(model, x, sol)
    aux = build_auxiliary(model, x, sol, allow_irregular=True)
    assert not aux.regularity.licq_ok
    # with the multiplier resting on the first mirrored bound, only the
    # left direction is consistent; the right one exposes the dependence
    assert semi_derivative(aux, np.array([-1.0])).dy[0] == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(errors.AuxInfeasible):
        semi_derivative(aux, np.array([1.0]))


def test_handcrafted_multiplier_split_is_infeasible_both_ways():
    # a valid KKT multiplier that splits mass across the mirrored bounds
    # turns both rows into strict equalities, which cannot hold together
    model = toy_bilevel_model()
    x = np.array([0.0])
    sol = KktSolution(y=np.zeros(1), lam=np.array([0.5, 0.5]), value=0.0)
    with pytest.raises(errors.AuxInfeasible):
        solution_semi_derivative(model, x, sol, np.array([1.0]), allow_irregular=True)


def test_retry_with_tightened_activity_tolerance():
    # just right of the toy kink the inactive mirror bound still sits
    # inside tol_act; the first classification is contradictory and the
    # documented 10x-tightened retry resolves it
    model = toy_bilevel_model()
    x = np.array([4e-8])
    sol = solve_victim(model, x)
    aux = build_auxiliary(model, x, sol, allow_irregular=True)
    with pytest.raises(errors.AuxInfeasible):
        semi_derivative(aux, np.array([-1.0]))
    sd = solution_semi_derivative(model, x, sol, np.array([-1.0]), allow_irregular=True)
    assert sd.dy[0] == pytest.approx(-1.0, abs=1e-9)


def test_aux_unbounded_when_second_order_condition_fails():
    # victim with a flat objective direction exposed by the data coupling
    model = VictimModel(
        dim_data=2,
        dim_var=2,
        assemble=lambda x: QpProblem(np.diag([1.0, 0.0]), np.array([-x[0], -x[1]])),
        grad_x_constraint=lambda i, x, y: np.zeros(2),
        cross_hessian=lambda x, y, lam: -np.eye(2),
        description="flat direction fixture",
    )
    x = np.array([0.3, 0.0])
    sol = solve_victim(model, x)
    aux = build_auxiliary(model, x, sol)
    assert not aux.regularity.ssoc_ok
    with pytest.raises(errors.AuxUnbounded):
        semi_derivative(aux, np.array([0.0, 1.0]))


def test_fd_directional_derivative_validation():
    model = kink_projection_model()
    x = np.array([0.2])
    with pytest.raises(errors.DimensionMismatch):
        fd_directional_derivative(model, x, np.zeros(1))
    with pytest.raises(errors.DimensionMismatch):
        fd_directional_derivative(model, x, np.ones(2))
    with pytest.raises(ValueError):
        fd_directional_derivative(model, x, np.ones(1), h=0.0)


def test_semi_derivative_direction_validation():
    model = kink_projection_model()
    sol = solve_victim(model, np.array([0.5]))
    aux = build_auxiliary(model, np.array([0.5]), sol)
    with pytest.raises(errors.DimensionMismatch):
        semi_derivative(aux, np.zeros(1))
    with pytest.raises(errors.DimensionMismatch):
        semi_derivative(aux, np.ones(2))
