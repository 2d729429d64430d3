import numpy as np
import pytest

from sddc.config import SolverConfig
from sddc.exceptions import ValidationError
from sddc.optimization.programs import LinearProgram, ProductGroup, QclProgram, QuadraticConstraint, SolveStatus
from sddc.optimization.qclp import (
    as_qclp,
    classify_convexity,
    is_negative_semidefinite,
    is_positive_semidefinite,
    solve_qclp,
)
from sddc.optimization.simplex import solve_lp


def simplex_lp(c) -> LinearProgram:
    c = np.asarray(c, dtype=float)
    return LinearProgram(c, [np.ones(c.size)], [1.0], None, None)


def capped_corner_program() -> QclProgram:
    """x = u ⊗ v，目标 4 - 2u₀ - v₀，约束 u₀v₀ <= 1/4，最优 u₀ = 1、v₀ = 1/4"""
    ones = np.ones((4, 4))
    corner = np.zeros((4, 4))
    corner[0, :] += 0.5
    corner[:, 0] += 0.5
    cap = QuadraticConstraint(0.25 * ones - corner, name="cap")
    return QclProgram(simplex_lp([1.0, 2.0, 3.0, 4.0]), (cap,), (ProductGroup([[0, 1], [2, 3]], name="g"),))


def test_semidefinite_tests():
    assert is_negative_semidefinite(-np.eye(2))
    assert not is_negative_semidefinite(np.diag([1.0, -1.0]))
    assert is_positive_semidefinite(np.ones((3, 3)))
    assert is_negative_semidefinite(np.zeros((2, 2))) and is_positive_semidefinite(np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        is_negative_semidefinite(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_classify_convexity():
    lp = simplex_lp([1.0, 1.0])
    assert classify_convexity(QclProgram(lp)).flag == "linear"

    concave = classify_convexity(QclProgram(lp, (QuadraticConstraint(-np.eye(2), r=1.0),)))
    assert (concave.flag, concave.nsd_test, concave.psd_test) == ("convex", True, False)

    trivial = classify_convexity(QclProgram(lp, (QuadraticConstraint(np.eye(2)),)))
    assert (trivial.flag, trivial.nsd_test, trivial.psd_test) == ("convex", False, True)
    assert trivial.active == []

    saddle = classify_convexity(QclProgram(lp, (QuadraticConstraint(np.diag([1.0, -1.0])),)))
    assert saddle.flag == "nonconvex"
    assert len(saddle.active) == 1


def test_linear_problem_matches_simplex():
    lp = simplex_lp([3.0, 1.0, 2.0])
    result = solve_qclp(as_qclp(lp))
    assert result.convexity_flag == "linear"
    assert result.objective == pytest.approx(solve_lp(lp).objective)
    np.testing.assert_allclose(result.x, [0.0, 1.0, 0.0])


def test_trivial_constraint_keeps_linear_optimum():
    qp = QclProgram(simplex_lp([3.0, 1.0]), (QuadraticConstraint(np.ones((2, 2))),))
    result = solve_qclp(qp)
    assert result.ok
    assert result.objective == pytest.approx(1.0)
    assert result.psd_test and not result.nsd_test


def test_convex_path_uses_slsqp():
    # min -x0 - x1，x0 + x1 <= 2，单位圆内
    lp = LinearProgram([-1.0, -1.0], None, None, [[1.0, 1.0]], [2.0])
    disk = QuadraticConstraint(-np.eye(2), r=1.0, name="disk")
    result = solve_qclp(QclProgram(lp, (disk,)))
    assert result.ok
    assert result.method == "slsqp"
    assert result.objective == pytest.approx(-np.sqrt(2.0), abs=1e-6)
    np.testing.assert_allclose(result.x, [np.sqrt(0.5)] * 2, atol=1e-5)


def test_infeasible_relaxation():
    lp = LinearProgram([1.0, 1.0], [[1.0, 1.0]], [-1.0], None, None)
    result = solve_qclp(QclProgram(lp, (QuadraticConstraint(np.diag([1.0, -1.0])),)))
    assert result.status is SolveStatus.INFEASIBLE
    assert result.convexity_flag == "nonconvex"


def test_grid_search_on_product_structure():
    result = solve_qclp(capped_corner_program())
    assert result.ok
    assert result.method == "exhaustive"
    assert result.convexity_flag == "nonconvex"
    assert result.objective == pytest.approx(1.75)
    np.testing.assert_allclose(result.factors[0][0], [1.0, 0.0])
    np.testing.assert_allclose(result.factors[0][1], [0.25, 0.75])
    assert result.grid_resolution <= SolverConfig().grid_resolution


def test_grid_search_independent_of_threads():
    single = solve_qclp(capped_corner_program(), threads=1)
    pooled = solve_qclp(capped_corner_program(), threads=4)
    np.testing.assert_array_equal(single.x, pooled.x)


def test_grid_budget_exhausted():
    result = solve_qclp(capped_corner_program(), budget=1)
    assert result.status is SolveStatus.BUDGET_EXHAUSTED
    assert not result.ok


def test_grid_without_feasible_point():
    lp = simplex_lp([1.0, 1.0, 1.0, 1.0])
    never = QuadraticConstraint(-np.ones((4, 4)), name="never")
    saddle = QuadraticConstraint(np.diag([1.0, -1.0, 0.0, 0.0]), name="saddle")
    qp = QclProgram(lp, (never, saddle), (ProductGroup([[0, 1], [2, 3]]),))
    result = solve_qclp(qp)
    assert result.status is SolveStatus.INFEASIBLE


def test_grid_polish_refines_coarse_optimum():
    # 步长 1/2 的网格最好只到 2.0，局部精修沿约束边界走到 1.75
    result = solve_qclp(capped_corner_program(), budget=4, config=SolverConfig(grid_resolution=0.5))
    assert result.ok
    assert result.grid_resolution == pytest.approx(0.5)
    assert result.extra["polished"]
    assert result.objective == pytest.approx(1.75, abs=1e-6)
    np.testing.assert_allclose(result.factors[0][1], [0.25, 0.75], atol=1e-5)


def test_grid_keeps_feasible_seed():
    config = SolverConfig(grid_resolution=0.5, polish_iter=0)
    coarse = solve_qclp(capped_corner_program(), budget=4, config=config)
    assert coarse.objective == pytest.approx(2.0)
    assert not coarse.extra["polished"]

    seeded = solve_qclp(capped_corner_program(), budget=4, config=config,
                        seeds=[np.array([0.25, 0.75, 0.0, 0.0]), None])
    assert seeded.extra["feasible_seeds"] == 1
    assert seeded.objective == pytest.approx(1.75)
    np.testing.assert_allclose(seeded.factors[0][1], [0.25, 0.75])

    ignored = solve_qclp(capped_corner_program(), budget=4, config=config, seeds=[np.array([1.0, 0.0, 0.0, 0.0])])
    assert ignored.extra["feasible_seeds"] == 0
    assert ignored.objective == pytest.approx(2.0)


def test_budget_exhausted_reports_best_seed():
    result = solve_qclp(capped_corner_program(), budget=1, seeds=[np.array([0.25, 0.75, 0.0, 0.0])])
    assert result.status is SolveStatus.BUDGET_EXHAUSTED
    assert result.objective == pytest.approx(1.75)
    np.testing.assert_allclose(result.x, [0.25, 0.75, 0.0, 0.0])
