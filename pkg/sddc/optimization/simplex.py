"""
稠密两阶段单纯形法。

采用表格形式与Bland规则（进基取下标最小的负既约成本列，出基在最小比值并列时取
基变量下标最小的行），保证不会循环，且相同输入得到完全相同的结果。
最优时通过对偶变量与既约成本给出最优性证明。
"""
import logging
from typing import List

import numpy as np

from sddc.optimization.programs import LinearProgram, SolverResult, SolveStatus

logger = logging.getLogger(__name__)

# 消去后视为零的绝对量
_ZERO = 1e-14


class _Tableau:
    """单纯形表：约束行 rows、目标行 obj（最后一列为右端项）与当前基"""

    def __init__(self, rows: np.ndarray, obj: np.ndarray, basis: List[int], tol: float):
        self.rows = rows
        self.obj = obj
        self.basis = basis
        self.tol = tol
        self.iterations = 0

    def pivot(self, r: int, j: int) -> None:
        rows = self.rows
        rows[r] /= rows[r, j]
        column = rows[:, j].copy()
        column[r] = 0.0
        rows -= np.outer(column, rows[r])
        self.obj -= self.obj[j] * rows[r]
        rows[np.abs(rows) < _ZERO] = 0.0
        self.obj[np.abs(self.obj) < _ZERO] = 0.0
        self.basis[r] = j
        self.iterations += 1

    def entering(self, limit: int) -> int:
        """Bland规则：下标最小的负既约成本列，-1 表示已最优"""
        candidates = np.flatnonzero(self.obj[:limit] < -self.tol)
        return int(candidates[0]) if candidates.size else -1

    def leaving(self, j: int) -> int:
        """最小比值检验，并列时取基变量下标最小的行，-1 表示无界"""
        column = self.rows[:, j]
        eligible = np.flatnonzero(column > self.tol)
        if eligible.size == 0:
            return -1
        ratios = self.rows[eligible, -1] / column[eligible]
        best = ratios.min()
        ties = eligible[ratios <= best + self.tol * max(1.0, abs(best))]
        return int(min(ties, key=lambda i: self.basis[i]))

    def run(self, limit: int, max_iter: int) -> SolveStatus:
        while True:
            if self.iterations >= max_iter:
                return SolveStatus.NUMERICAL_ERROR
            j = self.entering(limit)
            if j < 0:
                return SolveStatus.OPTIMAL
            r = self.leaving(j)
            if r < 0:
                return SolveStatus.UNBOUNDED
            self.pivot(r, j)


def solve_lp(lp: LinearProgram, tol: float = 1e-9, max_iter: int = 10_000) -> SolverResult:
    """用两阶段单纯形法求解线性规划

    Args:
        lp: 线性规划
        tol: 可行性与最优性容差
        max_iter: 总迭代次数上限

    Returns:
        SolverResult: 最优时包含解、目标值、对偶变量、既约成本与对偶间隙；
            不可行或无界时只包含状态

    示例：
        ```python
        lp = LinearProgram(c=[1.0], A_eq=[[1.0]], b_eq=[1.0], A_ub=None, b_ub=None)
        solve_lp(lp).x  # array([1.])
        ```
    """
    n, m_eq, m_ub = lp.n, lp.b_eq.size, lp.b_ub.size
    m = m_eq + m_ub
    width = n + m_ub
    A = np.zeros((m, width))
    A[:m_eq, :n] = lp.A_eq
    A[m_eq:, :n] = lp.A_ub
    A[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([lp.b_eq, lp.b_ub])
    cost = np.concatenate([lp.c, np.zeros(m_ub)])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign

    if m == 0:
        if np.any(lp.c < -tol):
            return SolverResult(SolveStatus.UNBOUNDED, method="simplex", message="无约束且目标可无限下降")
        return SolverResult(SolveStatus.OPTIMAL, x=np.zeros(n), objective=0.0, method="simplex",
                            duals_eq=np.zeros(0), duals_ub=np.zeros(0), reduced_costs=lp.c.copy(),
                            duality_gap=0.0)

    # 第一阶段：人工变量构成初始基
    rows = np.hstack([A, np.eye(m), b[:, None]])
    obj = np.zeros(width + m + 1)
    obj[:width] = -A.sum(axis=0)
    obj[-1] = -b.sum()
    tableau = _Tableau(rows, obj, list(range(width, width + m)), tol)
    status = tableau.run(width, max_iter)
    if status is SolveStatus.NUMERICAL_ERROR:
        return _failure(status, tableau, "第一阶段达到迭代上限")
    infeasibility = -tableau.obj[-1]
    feas_tol = 10.0 * tol * max(1.0, float(np.max(np.abs(b))))
    if infeasibility > feas_tol:
        logger.debug("第一阶段目标 %.3e > %.3e，问题不可行", infeasibility, feas_tol)
        return SolverResult(SolveStatus.INFEASIBLE, method="simplex", iterations=tableau.iterations,
                            message=f"第一阶段目标 {infeasibility:.3e}")

    kept = _drive_out_artificials(tableau, width)

    # 第二阶段：删去人工变量列，重新计算既约成本
    tableau.rows = np.hstack([tableau.rows[:, :width], tableau.rows[:, -1:]])
    basis_cost = cost[tableau.basis]
    tableau.obj = np.concatenate([cost - basis_cost @ tableau.rows[:, :width], [-basis_cost @ tableau.rows[:, -1]]])
    status = tableau.run(width, max_iter)
    if status is SolveStatus.UNBOUNDED:
        return SolverResult(SolveStatus.UNBOUNDED, method="simplex", iterations=tableau.iterations,
                            message="目标函数在可行域上无下界")
    if status is SolveStatus.NUMERICAL_ERROR:
        return _failure(status, tableau, "第二阶段达到迭代上限")

    full = np.zeros(width)
    full[tableau.basis] = tableau.rows[:, -1]
    full[np.abs(full) < tol] = 0.0
    x = np.clip(full[:n], 0.0, None)

    duals = np.zeros(m)
    B = A[kept][:, tableau.basis]
    y, *_ = np.linalg.lstsq(B.T, cost[tableau.basis], rcond=None)
    duals[kept] = y
    reduced = cost - A.T @ duals
    duals = duals * sign
    objective = float(lp.c @ x)
    gap = abs(objective - float(np.concatenate([lp.b_eq, lp.b_ub]) @ duals))

    residuals = lp.residuals(x)
    worst = max(residuals.values())
    if worst > feas_tol:
        logger.warning("单纯形解的原始残差 %.3e 超出容差", worst)
        return SolverResult(SolveStatus.NUMERICAL_ERROR, x=x, objective=objective, method="simplex",
                            iterations=tableau.iterations, message=f"原始残差 {worst:.3e}")
    if reduced.min(initial=0.0) < -feas_tol:
        logger.warning("既约成本最小值 %.3e 为负，最优性证明不成立", reduced.min())
        return SolverResult(SolveStatus.NUMERICAL_ERROR, x=x, objective=objective, method="simplex",
                            iterations=tableau.iterations, duals_eq=duals[:m_eq], duals_ub=duals[m_eq:],
                            reduced_costs=reduced[:n], duality_gap=gap,
                            message=f"对偶不可行：既约成本最小值 {reduced.min():.3e}",
                            extra={"primal_residual": worst, "min_reduced_cost": float(reduced.min())})

    logger.debug("单纯形法在 %d 次迭代后达到最优，目标值 %.12g", tableau.iterations, objective)
    return SolverResult(
        SolveStatus.OPTIMAL, x=x, objective=objective, method="simplex", iterations=tableau.iterations,
        duals_eq=duals[:m_eq], duals_ub=duals[m_eq:], reduced_costs=reduced[:n], duality_gap=gap,
        extra={"primal_residual": worst},
    )


def _drive_out_artificials(tableau: _Tableau, width: int) -> List[int]:
    """把仍在基中的人工变量换出；无法换出的行是冗余约束，予以删除"""
    n_rows = tableau.rows.shape[0]
    redundant = set()
    r = 0
    while r < tableau.rows.shape[0]:
        if tableau.basis[r] >= width:
            candidates = np.flatnonzero(np.abs(tableau.rows[r, :width]) > tableau.tol)
            if candidates.size:
                tableau.pivot(r, int(candidates[0]))
            else:
                # 留在基中的人工变量对应的原始约束是冗余的
                original = tableau.basis[r] - width
                logger.debug("删除冗余约束行 %d", original)
                redundant.add(original)
                tableau.rows = np.delete(tableau.rows, r, axis=0)
                del tableau.basis[r]
                continue
        r += 1
    return [i for i in range(n_rows) if i not in redundant]


def _failure(status: SolveStatus, tableau: _Tableau, message: str) -> SolverResult:
    logger.warning("单纯形法失败: %s", message)
    return SolverResult(status, method="simplex", iterations=tableau.iterations, message=message)
