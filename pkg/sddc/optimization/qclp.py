"""
二次约束线性规划（QCLP）求解模块。

求解路径：
- 无二次约束：直接调用单纯形法
- 每个二次约束都是凹的（Q 负半定）或恒成立的（Q 正半定且 q = 0、r >= 0）：
  约束集为凸集，从线性松弛的最优点出发用 SLSQP 求解
- 其余情形标记为非凸：若问题带有乘积结构（ProductGroup），在各块的概率单纯形
  网格上穷举，再围绕当前最好的若干候选逐级加密网格；线性松弛的最优点与调用方给出的种子
  作为额外候选，最好的若干候选再经 SLSQP 局部精修。结果是“网格分辨率内的全局最优”，
  不是全局最优证明
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, optimize

from sddc.config import SolverConfig
from sddc.exceptions import ValidationError
from sddc.optimization.programs import (
    LinearProgram,
    ProductGroup,
    QclProgram,
    QuadraticConstraint,
    SolverResult,
    SolveStatus,
)
from sddc.optimization.simplex import solve_lp

logger = logging.getLogger(__name__)

# 粗网格的候选分母（步长 1/D），从细到粗
COARSE_DENOMINATORS = (20, 10, 8, 5, 4, 2, 1)
# 每次加密时每个坐标允许转移的最大单位数
_MAX_TRANSFER = 2
# 单批评估的候选数
_CHUNK = 4096


def _symmetric_eigenvalues(Q: np.ndarray, tol: float) -> np.ndarray:
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[0] != Q.shape[1]:
        raise ValidationError("矩阵必须是方阵", shape=Q.shape)
    scale = max(1.0, float(np.max(np.abs(Q), initial=0.0)))
    if np.max(np.abs(Q - Q.T), initial=0.0) > tol * scale:
        raise ValidationError("矩阵的非对称部分超出容差", asymmetry=float(np.max(np.abs(Q - Q.T))))
    return linalg.eigvalsh(0.5 * (Q + Q.T))


def is_negative_semidefinite(Q: np.ndarray, tol: float = 1e-9) -> bool:
    """判断对称矩阵是否负半定（最大特征值 <= tol）

    Raises:
        ValidationError: 非对称部分超出容差时抛出
    """
    values = _symmetric_eigenvalues(Q, tol)
    return bool(values.size == 0 or values[-1] <= tol)


def is_positive_semidefinite(Q: np.ndarray, tol: float = 1e-9) -> bool:
    """判断对称矩阵是否正半定（最小特征值 >= -tol）"""
    values = _symmetric_eigenvalues(Q, tol)
    return bool(values.size == 0 or values[0] >= -tol)


@dataclass
class _Convexity:
    flag: str
    nsd_test: bool
    psd_test: bool
    active: List[QuadraticConstraint]


def classify_convexity(qp: QclProgram, tol: float = 1e-9) -> _Convexity:
    """判断二次约束集的凸性

    约束 xᵀQx + qᵀx + r >= 0 在 Q 负半定时定义凸集；
    Q 正半定且 q = 0、r >= 0 时恒成立，可以直接去掉。
    nsd_test 为“所有 Q_j 负半定”这一判据本身，psd_test 为“所有 Q_j 正半定”。
    """
    if not qp.quadratic:
        return _Convexity("linear", True, True, [])
    nsd = [is_negative_semidefinite(qc.Q, tol) for qc in qp.quadratic]
    psd = [is_positive_semidefinite(qc.Q, tol) for qc in qp.quadratic]
    trivial = [p and not np.any(qc.q) and qc.r >= 0 for p, qc in zip(psd, qp.quadratic)]
    active = [qc for qc, t in zip(qp.quadratic, trivial) if not t]
    convex = all(n or t for n, t in zip(nsd, trivial))
    result = _Convexity("convex" if convex else "nonconvex", all(nsd), all(psd), active)
    if result.nsd_test != convex:
        logger.info(
            "凸性判据不一致: 负半定判据=%s，约束集实际为%s（恒成立约束 %d 个）",
            result.nsd_test, result.flag, sum(trivial),
        )
    return result


def solve_qclp(
    qp: QclProgram,
    tol: float = 1e-9,
    budget: Optional[int] = None,
    config: Optional[SolverConfig] = None,
    threads: int = 1,
    seeds: Sequence[Optional[np.ndarray]] = (),
) -> SolverResult:
    """求解二次约束线性规划

    Args:
        qp: 规划问题
        tol: 可行性容差
        budget: 粗网格的候选数上限，缺省取 config.grid_budget
        config: 求解器配置
        threads: 穷举回退使用的线程数，结果与线程数无关
        seeds: 穷举回退的种子点（原变量空间），例如已知可行策略的占用测度

    Returns:
        SolverResult: 带 convexity_flag、nsd_test、psd_test 的结果；
            穷举回退时 grid_resolution 为最终步长，factors 为各乘积块的分布
    """
    config = config or SolverConfig(tol=tol)
    budget = budget or config.grid_budget
    convexity = classify_convexity(qp, tol)
    relaxed = solve_lp(qp.linear, tol=tol, max_iter=config.max_iter)
    extras = {"convexity_flag": convexity.flag, "nsd_test": convexity.nsd_test, "psd_test": convexity.psd_test}

    if relaxed.status is SolveStatus.INFEASIBLE:
        # 线性松弛不可行则原问题不可行
        return _annotate(relaxed, **extras)
    if not convexity.active:
        return _annotate(relaxed, **extras)

    if convexity.flag == "convex":
        result = _solve_slsqp(qp, convexity.active, relaxed, tol, config.slsqp_max_iter)
        if result.ok or not qp.product_groups:
            return _annotate(result, **extras)
        logger.warning("SLSQP 未收敛（%s），改用网格穷举", result.message)
    elif not qp.product_groups:
        logger.warning("非凸问题缺少乘积结构，只能用 SLSQP 求局部解")
        result = _solve_slsqp(qp, convexity.active, relaxed, tol, config.slsqp_max_iter)
        result.message = "非凸问题的局部解: " + result.message
        return _annotate(result, **extras)

    grid = PolicyGrid(qp, tol)
    result = grid.search(budget, config.grid_resolution, config.incumbents, threads, [relaxed.x, *seeds],
                         config.polish_iter)
    return _annotate(result, **extras)


def _annotate(result: SolverResult, convexity_flag: str, nsd_test: bool, psd_test: bool) -> SolverResult:
    result.convexity_flag = convexity_flag
    result.nsd_test = nsd_test
    result.psd_test = psd_test
    return result


def _solve_slsqp(
    qp: QclProgram,
    active: Sequence[QuadraticConstraint],
    relaxed: SolverResult,
    tol: float,
    max_iter: int,
) -> SolverResult:
    lp = qp.linear
    constraints = []
    if lp.b_eq.size:
        constraints.append({"type": "eq", "fun": lambda x: lp.A_eq @ x - lp.b_eq, "jac": lambda x: lp.A_eq})
    if lp.b_ub.size:
        constraints.append({"type": "ineq", "fun": lambda x: lp.b_ub - lp.A_ub @ x, "jac": lambda x: -lp.A_ub})
    for qc in active:
        constraints.append({"type": "ineq", "fun": qc.value, "jac": qc.gradient})
    x0 = relaxed.x if relaxed.x is not None else np.zeros(lp.n)
    solution = optimize.minimize(
        lambda x: float(lp.c @ x), x0, jac=lambda x: lp.c, method="SLSQP",
        bounds=[(0.0, None)] * lp.n, constraints=constraints,
        options={"maxiter": max_iter, "ftol": tol},
    )
    x = np.clip(solution.x, 0.0, None)
    feas_tol = max(tol, 1e-8) * 100
    residuals = lp.residuals(x)
    quad = min((qc.value(x) for qc in active), default=0.0)
    feasible = max(residuals.values()) <= feas_tol and quad >= -feas_tol
    status = SolveStatus.OPTIMAL if solution.success and feasible else SolveStatus.NUMERICAL_ERROR
    logger.debug("SLSQP: %s，迭代 %d 次，最小二次约束值 %.3e", solution.message, solution.nit, quad)
    return SolverResult(
        status, x=x, objective=float(lp.c @ x), method="slsqp", iterations=int(solution.nit),
        message=str(solution.message), extra={"primal_residual": max(residuals.values()), "min_quadratic": quad},
    )


def _compositions(d: int, total: int) -> np.ndarray:
    """所有长度为 d、和为 total 的非负整数向量（字典序）"""
    if d == 1:
        return np.array([[total]], dtype=np.int64)
    rows = []
    for bars in itertools.combinations(range(total + d - 1), d - 1):
        edges = (-1,) + bars + (total + d - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(d)])
    return np.array(rows, dtype=np.int64)


class PolicyGrid:
    """乘积结构上的网格穷举

    每个乘积块的每个轴是一个概率单纯形（“槽”）。候选点是所有槽上的整数向量，
    除以分母 D 得到分布。固定分布后块权重 y 由线性等式唯一确定（伪逆求解）。
    网格之外还接受调用方给出的种子点（按各块边缘分布折算），
    最后从最好的若干候选出发在分布空间上用 SLSQP 做局部精修。
    """

    def __init__(self, qp: QclProgram, tol: float):
        self.qp = qp
        self.lp = qp.linear
        self.tol = tol
        self.groups: List[ProductGroup] = list(qp.product_groups)
        covered = np.concatenate([g.indices.reshape(-1) for g in self.groups])
        if covered.size != self.lp.n:
            raise ValidationError("网格穷举要求乘积块覆盖全部变量", covered=int(covered.size), n=self.lp.n)
        self.slots: List[Tuple[int, int]] = [(g, axis) for g, group in enumerate(self.groups)
                                             for axis in range(group.indices.ndim)]
        self.sizes = [self.groups[g].shape[axis] for g, axis in self.slots]
        self.bounds = np.concatenate([[0], np.cumsum(self.sizes)])
        # 支撑在单个块内的齐次约束按单位块权重评估，与块是否被访问无关
        self.unit_checks, self.point_checks = [], []
        for qc in qp.quadratic:
            support = set(qc.support().tolist())
            inside = any(support <= set(g.indices.reshape(-1).tolist()) for g in self.groups)
            (self.unit_checks if qc.homogeneous and inside else self.point_checks).append(qc)
        self.evaluations = 0

    def coarse_count(self, denominator: int) -> int:
        return math.prod(math.comb(denominator + d - 1, d - 1) for d in self.sizes)

    def search(
        self,
        budget: int,
        resolution: float,
        incumbents: int,
        threads: int,
        seeds: Sequence[Optional[np.ndarray]] = (),
        polish_iter: int = 200,
    ) -> SolverResult:
        """粗网格穷举、逐级加密、并入种子点后局部精修

        Args:
            budget: 粗网格候选数上限
            resolution: 加密停止的步长
            incumbents: 每级保留与精修的候选数
            threads: 评估线程数
            seeds: 原变量空间中的种子点，不可行的种子被忽略
            polish_iter: 局部精修的 SLSQP 迭代上限，0 表示不精修

        Returns:
            SolverResult: method 为 exhaustive；extra 中记录可行种子数与是否经精修改进
        """
        seeded = self._seed_candidates(seeds)
        denominator = next((D for D in COARSE_DENOMINATORS if self.coarse_count(D) <= budget), None)
        if denominator is None:
            result = SolverResult(SolveStatus.BUDGET_EXHAUSTED, method="exhaustive",
                                  message=f"最粗网格的候选数 {self.coarse_count(1)} 超出预算 {budget}")
            if seeded:
                result.objective, dists = seeded[0]
                result.x = self._materialize(dists)
            return result
        grids = [_compositions(d, denominator) for d in self.sizes]
        count = math.prod(len(g) for g in grids)
        logger.info("非凸回退: 粗网格步长 1/%d，候选 %d 个，可行种子 %d 个", denominator, count, len(seeded))
        flat = np.arange(count)
        choice = np.unravel_index(flat, [len(g) for g in grids]) if count else ()
        points = np.hstack([grids[i][choice[i]] for i in range(len(grids))])
        best = self._top(points, denominator, incumbents, threads)

        while best and 1.0 / denominator > resolution + 1e-15:
            denominator *= 2
            scaled = [(obj, key, point * 2) for obj, key, point in best]
            candidates = [p for _, _, p in scaled]
            for _, _, point in scaled:
                candidates.extend(self._neighbourhood(point, denominator, budget, threads))
            merged = np.unique(np.array(candidates), axis=0)
            best = self._top(merged, denominator, incumbents, threads)

        pool = [(objective, point / denominator) for objective, _, point in best] + seeded
        if not pool:
            return SolverResult(SolveStatus.INFEASIBLE, method="exhaustive", iterations=self.evaluations,
                                grid_resolution=1.0 / denominator,
                                message=f"步长 1/{denominator} 的网格上没有可行点")
        pool.sort(key=lambda item: (item[0], tuple(item[1])))
        objective, dists = pool[0]
        polished = False
        for _, start in (pool[:incumbents] if polish_iter > 0 else []):
            refined = self._polish(start, polish_iter)
            if refined is not None and refined[0] < objective - 1e-9:
                objective, dists = refined
                polished = True

        return SolverResult(
            SolveStatus.OPTIMAL, x=self._materialize(dists), objective=float(objective), method="exhaustive",
            iterations=self.evaluations, grid_resolution=1.0 / denominator, factors=self._factors(dists),
            message=f"网格分辨率 1/{denominator} 内的全局最优并经局部精修（启发式，非全局证明）",
            extra={"feasible_seeds": len(seeded), "polished": polished},
        )

    def _seed_candidates(self, seeds: Sequence[Optional[np.ndarray]]) -> List[Tuple[float, np.ndarray]]:
        rows = [self._dists_from_x(x) for x in seeds if x is not None]
        if not rows:
            return []
        dists = np.vstack(rows)
        feasible, objective, _ = self._evaluate_chunk(dists)
        found = [(float(objective[i]), dists[i]) for i in np.flatnonzero(feasible)]
        return sorted(found, key=lambda item: (item[0], tuple(item[1])))

    def _dists_from_x(self, x: np.ndarray) -> np.ndarray:
        """把原变量折算为各槽上的边缘分布；权重为零的块取均匀分布"""
        x = np.clip(np.asarray(x, dtype=float), 0.0, None)
        parts = []
        for g, axis in self.slots:
            block = x[self.groups[g].indices]
            others = tuple(k for k in range(block.ndim) if k != axis)
            marginal = block.sum(axis=others) if others else block
            total = marginal.sum()
            parts.append(marginal / total if total > 1e-12 else np.full(marginal.size, 1.0 / marginal.size))
        return np.concatenate(parts)

    def _polish(self, start: np.ndarray, max_iter: int) -> Optional[Tuple[float, np.ndarray]]:
        """在各槽的概率单纯形上做 SLSQP 局部下降，不可行时返回 None"""
        simplex_rows = np.zeros((len(self.slots), start.size))
        for i in range(len(self.slots)):
            simplex_rows[i, self.bounds[i]:self.bounds[i + 1]] = 1.0
        solution = optimize.minimize(
            lambda z: float(self._margins(z[None, :])[2][0] @ self.lp.c), start, method="SLSQP",
            bounds=[(0.0, 1.0)] * start.size,
            constraints=[
                {"type": "eq", "fun": lambda z: simplex_rows @ z - 1.0, "jac": lambda z: simplex_rows},
                {"type": "ineq", "fun": lambda z: self._margins(z[None, :])[0][0]},
            ],
            options={"maxiter": max_iter, "ftol": 1e-12},
        )
        z = np.clip(solution.x, 0.0, None)
        for i in range(len(self.slots)):
            lo, hi = self.bounds[i], self.bounds[i + 1]
            total = z[lo:hi].sum()
            z[lo:hi] = z[lo:hi] / total if total > 0 else start[lo:hi]
        feasible, objective, _ = self._evaluate_chunk(z[None, :])
        self.evaluations += int(solution.nfev)
        if not feasible[0]:
            logger.debug("局部精修终点不可行: %s", solution.message)
            return None
        return float(objective[0]), z

    def _neighbourhood(self, point: np.ndarray, denominator: int, budget: int, threads: int) -> List[np.ndarray]:
        options = [self._slot_moves(point[self.bounds[i]:self.bounds[i + 1]]) for i in range(len(self.slots))]
        total = math.prod(len(o) for o in options)
        if total <= budget:
            return [np.concatenate(combo) for combo in itertools.product(*options)]
        # 组合过多时按槽做循环坐标下降
        current = point.copy()
        current_obj = self._score(current[None, :], denominator, threads)[0]
        visited = [current.copy()]
        for _ in range(50):
            improved = False
            for i in range(len(self.slots)):
                lo, hi = self.bounds[i], self.bounds[i + 1]
                trial = np.repeat(current[None, :], len(options[i]), axis=0)
                trial[:, lo:hi] = np.array(options[i])
                scores = self._score(trial, denominator, threads)
                k = int(np.argmin(scores))
                if scores[k] < current_obj - 1e-15:
                    current, current_obj, improved = trial[k].copy(), scores[k], True
                    visited.append(current.copy())
            if not improved:
                break
        return visited

    @staticmethod
    def _slot_moves(values: np.ndarray) -> List[np.ndarray]:
        moves = [values.copy()]
        d = values.size
        for amount in range(1, _MAX_TRANSFER + 1):
            for i in range(d):
                if values[i] < amount:
                    continue
                for j in range(d):
                    if i != j:
                        moved = values.copy()
                        moved[i] -= amount
                        moved[j] += amount
                        moves.append(moved)
        return moves

    def _score(self, points: np.ndarray, denominator: int, threads: int) -> np.ndarray:
        feasible, objective, _ = self._evaluate(points, denominator, threads)
        return np.where(feasible, objective, np.inf)

    def _top(self, points: np.ndarray, denominator: int, k: int, threads: int):
        feasible, objective, xs = self._evaluate(points, denominator, threads)
        idx = np.flatnonzero(feasible)
        if idx.size == 0:
            return []
        # 目标值优先，其次按解向量字典序
        keys = tuple(xs[idx][:, col] for col in range(xs.shape[1] - 1, -1, -1)) + (objective[idx],)
        order = idx[np.lexsort(keys)]
        return [(float(objective[i]), tuple(xs[i]), points[i]) for i in order[:k]]

    def _evaluate(self, points: np.ndarray, denominator: int, threads: int):
        dists = np.atleast_2d(points) / denominator
        chunks = [dists[i:i + _CHUNK] for i in range(0, len(dists), _CHUNK)]
        if threads > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(self._evaluate_chunk, chunks))
        else:
            parts = [self._evaluate_chunk(chunk) for chunk in chunks]
        self.evaluations += len(dists)
        return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                np.vstack([p[2] for p in parts]))

    def _unit_blocks(self, dists: np.ndarray) -> np.ndarray:
        """每个块取单位权重时的变量值，形状 (B, n, 块数)"""
        batch = len(dists)
        blocks = np.zeros((batch, self.lp.n, len(self.groups)))
        slot = 0
        for g, group in enumerate(self.groups):
            block = np.ones((batch,))
            for _ in range(group.indices.ndim):
                lo, hi = self.bounds[slot], self.bounds[slot + 1]
                dist = dists[:, lo:hi]
                block = block[..., None] * dist.reshape((batch,) + (1,) * (block.ndim - 1) + (hi - lo,))
                slot += 1
            blocks[:, group.indices.reshape(-1), g] = block.reshape(batch, -1)
        return blocks

    def _margins(self, dists: np.ndarray):
        """各候选的约束裕量（>= 0 为满足）、等式残差与变量值

        裕量列依次为块权重、线性不等式、单位权重下的齐次约束、其余二次约束。
        """
        lp = self.lp
        blocks = self._unit_blocks(dists)
        if lp.b_eq.size:
            system = np.einsum("ij,bjg->big", lp.A_eq, blocks)
            weights = np.einsum("bgi,i->bg", np.linalg.pinv(system), lp.b_eq)
            residual = np.max(np.abs(np.einsum("big,bg->bi", system, weights) - lp.b_eq), axis=1)
        else:
            weights = np.zeros((len(dists), len(self.groups)))
            residual = np.zeros(len(dists))
        xs = np.einsum("bng,bg->bn", blocks, np.clip(weights, 0.0, None))
        columns = [weights]
        if lp.b_ub.size:
            columns.append(lp.b_ub - xs @ lp.A_ub.T)
        if self.unit_checks:
            unit = blocks.sum(axis=2)
            columns.extend(qc.value(unit)[:, None] for qc in self.unit_checks)
        columns.extend(qc.value(xs)[:, None] for qc in self.point_checks)
        return np.hstack(columns), residual, xs

    def _evaluate_chunk(self, dists: np.ndarray):
        margins, residual, xs = self._margins(dists)
        scale = max(1.0, float(np.max(np.abs(self.lp.b_eq), initial=0.0)))
        feasible = (residual <= 1e-8 * scale) & np.all(margins >= -self.tol, axis=1)
        return feasible, xs @ self.lp.c, xs

    def _materialize(self, dists: np.ndarray) -> np.ndarray:
        return self._margins(np.asarray(dists, dtype=float)[None, :])[2][0]

    def _factors(self, dists: np.ndarray) -> List[List[np.ndarray]]:
        factors: List[List[np.ndarray]] = [[] for _ in self.groups]
        for i, (g, _) in enumerate(self.slots):
            factors[g].append(np.asarray(dists[self.bounds[i]:self.bounds[i + 1]], dtype=float))
        return factors


def as_qclp(lp: LinearProgram) -> QclProgram:
    """把线性规划包装为不含二次约束的 QCLP"""
    return QclProgram(lp)
