import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from sddc.optimization.programs import LinearProgram, SolveStatus
from sddc.optimization.simplex import solve_lp


def test_textbook_problem():
    # max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
    lp = LinearProgram([-3.0, -5.0], None, None, [[1.0, 0.0], [0.0, 2.0], [3.0, 2.0]], [4.0, 12.0, 18.0])
    result = solve_lp(lp)
    assert result.ok
    np.testing.assert_allclose(result.x, [2.0, 6.0])
    assert result.objective == pytest.approx(-36.0)
    assert result.duality_gap == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(result.duals_ub, [0.0, -1.5, -1.0], atol=1e-9)


def test_infeasible():
    lp = LinearProgram([1.0, 1.0], [[1.0, 1.0]], [-1.0], None, None)
    assert solve_lp(lp).status is SolveStatus.INFEASIBLE


def test_unbounded():
    lp = LinearProgram([-1.0, 0.0], [[0.0, 1.0]], [1.0], None, None)
    assert solve_lp(lp).status is SolveStatus.UNBOUNDED


def test_no_constraints():
    assert solve_lp(LinearProgram([1.0, 0.0], None, None, None, None)).objective == 0.0
    assert solve_lp(LinearProgram([-1.0], None, None, None, None)).status is SolveStatus.UNBOUNDED


def test_redundant_equalities():
    lp = LinearProgram([1.0, 2.0], [[1.0, 1.0], [2.0, 2.0]], [1.0, 2.0], None, None)
    result = solve_lp(lp)
    assert result.ok
    np.testing.assert_allclose(result.x, [1.0, 0.0])


def test_negative_right_hand_side():
    # -x - y <= -1 即 x + y >= 1
    lp = LinearProgram([2.0, 1.0], None, None, [[-1.0, -1.0]], [-1.0])
    result = solve_lp(lp)
    np.testing.assert_allclose(result.x, [0.0, 1.0])
    assert result.duals_ub[0] == pytest.approx(-1.0)


def test_degenerate_vertex():
    lp = LinearProgram([-1.0, -1.0], None, None, [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], [1.0, 1.0, 2.0])
    result = solve_lp(lp)
    assert result.objective == pytest.approx(-2.0)


@settings(max_examples=60, deadline=None, derandomize=True)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 6), m_eq=st.integers(0, 3), m_ub=st.integers(0, 3))
def test_matches_scipy_linprog(seed, n, m_eq, m_ub):
    rng = np.random.default_rng(seed)
    m_eq = min(m_eq, n)
    feasible = rng.uniform(0.0, 1.0, size=n)
    A_eq = rng.uniform(-1.0, 1.0, size=(m_eq, n))
    A_ub = rng.uniform(-1.0, 1.0, size=(m_ub, n))
    b_eq = A_eq @ feasible
    b_ub = A_ub @ feasible + rng.uniform(0.0, 0.5, size=m_ub)
    c = rng.uniform(0.0, 2.0, size=n)
    lp = LinearProgram(c, A_eq, b_eq, A_ub, b_ub)

    result = solve_lp(lp)
    oracle = linprog(c, A_ub=A_ub if m_ub else None, b_ub=b_ub if m_ub else None,
                     A_eq=A_eq if m_eq else None, b_eq=b_eq if m_eq else None,
                     bounds=[(0, None)] * n, method="highs")
    assert oracle.status == 0
    assert result.ok
    assert result.objective == pytest.approx(oracle.fun, abs=1e-7)
    residuals = lp.residuals(result.x)
    assert max(residuals.values()) <= 1e-7
    assert result.reduced_costs.min(initial=0.0) >= -1e-7


def test_dual_infeasible_certificate_is_rejected(monkeypatch):
    # 对偶求解给出全零对偶，既约成本即为目标系数，出现负值时不能报告最优
    def zero_duals(matrix, rhs, rcond=None):
        k = matrix.shape[1]
        return np.zeros(k), np.zeros(0), k, np.ones(k)

    monkeypatch.setattr(np.linalg, "lstsq", zero_duals)
    lp = LinearProgram([-3.0, -5.0], None, None, [[1.0, 0.0], [0.0, 2.0], [3.0, 2.0]], [4.0, 12.0, 18.0])
    result = solve_lp(lp)
    assert result.status is SolveStatus.NUMERICAL_ERROR
    assert not result.ok
    assert result.extra["min_reduced_cost"] == pytest.approx(-5.0)
    np.testing.assert_allclose(result.x, [2.0, 6.0])
