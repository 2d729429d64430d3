"""
数学规划问题的数据结构模块。

定义线性规划（LinearProgram）、二次约束线性规划（QclProgram）、
求解状态与求解结果，以及规划问题的JSON导出与加载（用于 --dump-lp / --dump-qp）。

所有变量均满足 x >= 0。
"""
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from sddc.exceptions import DimensionError, SchemaError, ValidationError

logger = logging.getLogger(__name__)

PROGRAM_SCHEMA = 1


class SolveStatus(str, Enum):
    """求解状态"""
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    BUDGET_EXHAUSTED = "budget_exhausted"
    NUMERICAL_ERROR = "numerical_error"


@dataclass(frozen=True)
class LinearProgram:
    """线性规划 min cᵀx s.t. A_eq x = b_eq, A_ub x <= b_ub, x >= 0

    属性说明：
        c (np.ndarray): 目标系数
        A_eq, b_eq (np.ndarray): 等式约束
        A_ub, b_ub (np.ndarray): 不等式约束
        variable_names (Tuple[str, ...]): 变量名，顺序即变量下标
        row_names (Tuple[str, ...]): 约束行名，先等式后不等式
    """
    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    variable_names: tuple = ()
    row_names: tuple = ()

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.size
        A_eq, b_eq = _block(self.A_eq, self.b_eq, n, "等式")
        A_ub, b_ub = _block(self.A_ub, self.b_ub, n, "不等式")
        for name, array in (("c", c), ("A_eq", A_eq), ("b_eq", b_eq), ("A_ub", A_ub), ("b_ub", b_ub)):
            if not np.all(np.isfinite(array)):
                raise ValidationError(f"{name} 含有非有限值")
            array.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A_eq", A_eq)
        object.__setattr__(self, "b_eq", b_eq)
        object.__setattr__(self, "A_ub", A_ub)
        object.__setattr__(self, "b_ub", b_ub)
        names = tuple(self.variable_names) or tuple(f"x{i}" for i in range(n))
        if len(names) != n:
            raise DimensionError("变量名数量与变量数不一致", expected=n, actual=len(names))
        object.__setattr__(self, "variable_names", names)
        rows = tuple(self.row_names) or (
            tuple(f"eq{i}" for i in range(b_eq.size)) + tuple(f"ub{i}" for i in range(b_ub.size))
        )
        if len(rows) != b_eq.size + b_ub.size:
            raise DimensionError("约束行名数量与约束数不一致", expected=b_eq.size + b_ub.size, actual=len(rows))
        object.__setattr__(self, "row_names", rows)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.b_eq.size + self.b_ub.size

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x)

    def residuals(self, x: np.ndarray) -> Dict[str, float]:
        """原始可行性残差（等式、不等式、非负性）"""
        x = np.asarray(x, dtype=float)
        eq = float(np.max(np.abs(self.A_eq @ x - self.b_eq), initial=0.0))
        ub = float(np.max(self.A_ub @ x - self.b_ub, initial=0.0))
        return {"equality": eq, "inequality": max(ub, 0.0), "bounds": float(max(-x.min(initial=0.0), 0.0))}

    def to_mapping(self) -> Dict[str, Any]:
        return {
            "schema": PROGRAM_SCHEMA,
            "kind": "lp",
            "variables": list(self.variable_names),
            "rows": list(self.row_names),
            "c": self.c.tolist(),
            "A_eq": self.A_eq.tolist(),
            "b_eq": self.b_eq.tolist(),
            "A_ub": self.A_ub.tolist(),
            "b_ub": self.b_ub.tolist(),
        }

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "LinearProgram":
        _check_schema(data, "lp")
        n = len(data["c"])
        return cls(
            c=np.array(data["c"], dtype=float),
            A_eq=np.array(data["A_eq"], dtype=float).reshape(-1, n),
            b_eq=np.array(data["b_eq"], dtype=float),
            A_ub=np.array(data["A_ub"], dtype=float).reshape(-1, n),
            b_ub=np.array(data["b_ub"], dtype=float),
            variable_names=tuple(data.get("variables", ())),
            row_names=tuple(data.get("rows", ())),
        )


@dataclass(frozen=True)
class QuadraticConstraint:
    """二次约束 xᵀQx + qᵀx + r >= 0

    属性说明：
        Q (np.ndarray): 对称矩阵
        q (np.ndarray): 线性项，缺省为零
        r (float): 常数项
        name (str): 约束名
    """
    Q: np.ndarray
    q: Optional[np.ndarray] = None
    r: float = 0.0
    name: str = ""

    def __post_init__(self):
        Q = np.atleast_2d(np.array(self.Q, dtype=float))
        n = Q.shape[0]
        if Q.shape != (n, n):
            raise DimensionError("Q 必须是方阵", shape=Q.shape)
        scale = max(1.0, float(np.max(np.abs(Q), initial=0.0)))
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12 * scale:
            raise ValidationError("Q 必须是对称矩阵", name=self.name)
        q = np.zeros(n) if self.q is None else np.asarray(self.q, dtype=float).reshape(-1)
        if q.shape != (n,):
            raise DimensionError("q 的长度与 Q 不一致", expected=n, actual=q.shape)
        Q.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", float(self.r))

    @property
    def homogeneous(self) -> bool:
        """是否为齐次二次型（q = 0，r = 0）"""
        return not np.any(self.q) and self.r == 0.0

    def value(self, x: np.ndarray) -> Union[float, np.ndarray]:
        """约束左端值；x 可以是单个点或按行堆叠的多个点"""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(x @ self.Q @ x + self.q @ x + self.r)
        return np.einsum("bi,ij,bj->b", x, self.Q, x) + x @ self.q + self.r

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * self.Q @ x + self.q

    def support(self) -> np.ndarray:
        """约束涉及的变量下标"""
        return np.flatnonzero(np.any(self.Q != 0, axis=0) | (self.q != 0))


@dataclass(frozen=True)
class ProductGroup:
    """乘积结构的变量块

    块内变量满足 x[indices[i, j, ...]] = w · u_i · v_j · …，
    其中 w >= 0 为块权重，u、v… 为各轴上的概率分布。
    穷举回退在这些分布的网格上搜索。

    属性说明：
        indices (np.ndarray): 变量下标数组，每个轴对应一个单纯形因子
        name (str): 块名（通常为MDP状态）
    """
    indices: np.ndarray
    name: str = ""

    def __post_init__(self):
        indices = np.array(self.indices, dtype=np.int64)
        if indices.ndim == 0 or indices.size == 0:
            raise ValidationError("乘积块不能为空", name=self.name)
        indices.setflags(write=False)
        object.__setattr__(self, "indices", indices)

    @property
    def shape(self) -> tuple:
        return self.indices.shape


@dataclass(frozen=True)
class QclProgram:
    """二次约束线性规划 min cᵀx s.t. 线性约束、xᵀQ_jx + q_jᵀx + r_j >= 0、x >= 0

    属性说明：
        linear (LinearProgram): 目标与线性约束
        quadratic (Tuple[QuadraticConstraint, ...]): 二次约束
        product_groups (Tuple[ProductGroup, ...]): 可选的乘积结构，供穷举回退使用
    """
    linear: LinearProgram
    quadratic: tuple = ()
    product_groups: tuple = ()

    def __post_init__(self):
        quadratic = tuple(self.quadratic)
        for constraint in quadratic:
            if constraint.Q.shape[0] != self.linear.n:
                raise DimensionError("二次约束维度与变量数不一致", name=constraint.name,
                                     expected=self.linear.n, actual=constraint.Q.shape[0])
        groups = tuple(self.product_groups)
        if groups:
            seen = np.concatenate([g.indices.reshape(-1) for g in groups])
            if len(np.unique(seen)) != seen.size or seen.min() < 0 or seen.max() >= self.linear.n:
                raise ValidationError("乘积块的变量下标必须互不重叠且在范围内")
        object.__setattr__(self, "quadratic", quadratic)
        object.__setattr__(self, "product_groups", groups)

    @property
    def n(self) -> int:
        return self.linear.n

    def to_mapping(self) -> Dict[str, Any]:
        mapping = self.linear.to_mapping()
        mapping["kind"] = "qclp"
        mapping["quadratic"] = [
            {"name": qc.name, "Q": qc.Q.tolist(), "q": qc.q.tolist(), "r": qc.r} for qc in self.quadratic
        ]
        mapping["product_groups"] = [
            {"name": g.name, "indices": g.indices.tolist()} for g in self.product_groups
        ]
        return mapping

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "QclProgram":
        _check_schema(data, "qclp")
        linear = LinearProgram.from_mapping({**data, "kind": "lp"})
        quadratic = tuple(
            QuadraticConstraint(np.array(item["Q"]), np.array(item["q"]), item["r"], item.get("name", ""))
            for item in data.get("quadratic", [])
        )
        groups = tuple(
            ProductGroup(np.array(item["indices"]), item.get("name", "")) for item in data.get("product_groups", [])
        )
        return cls(linear, quadratic, groups)


@dataclass
class SolverResult:
    """求解结果

    属性说明：
        status (SolveStatus): 求解状态
        x (Optional[np.ndarray]): 最优解（或预算耗尽时的当前最好解）
        objective (Optional[float]): 目标值
        method (str): 实际使用的算法（simplex、slsqp、exhaustive）
        iterations (int): 迭代或评估次数
        duals_eq, duals_ub (Optional[np.ndarray]): 线性规划的对偶变量
        reduced_costs (Optional[np.ndarray]): 既约成本
        duality_gap (Optional[float]): 对偶间隙
        convexity_flag (Optional[str]): linear、convex 或 nonconvex
        nsd_test (Optional[bool]): 所有 Q_j 是否负半定
        psd_test (Optional[bool]): 所有 Q_j 是否正半定
        grid_resolution (Optional[float]): 穷举回退的最终网格步长
        factors (Optional[List[List[np.ndarray]]]): 穷举回退得到的各乘积块分布
        message (str): 诊断信息
    """
    status: SolveStatus
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    method: str = ""
    iterations: int = 0
    duals_eq: Optional[np.ndarray] = None
    duals_ub: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    duality_gap: Optional[float] = None
    convexity_flag: Optional[str] = None
    nsd_test: Optional[bool] = None
    psd_test: Optional[bool] = None
    grid_resolution: Optional[float] = None
    factors: Optional[List[List[np.ndarray]]] = None
    message: str = ""
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    def to_dict(self) -> Dict[str, Any]:
        """转换为诊断字典（不含解向量）"""
        payload = {
            "status": self.status.value,
            "objective": self.objective,
            "method": self.method,
            "iterations": self.iterations,
            "duality_gap": self.duality_gap,
            "convexity_flag": self.convexity_flag,
            "nsd_test": self.nsd_test,
            "psd_test": self.psd_test,
            "grid_resolution": self.grid_resolution,
            "message": self.message,
        }
        payload.update(self.extra)
        return payload


def dump_program(program: Union[LinearProgram, QclProgram], path: Union[str, Path]) -> Path:
    """将规划问题导出为JSON文件"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(program.to_mapping(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("规划问题已导出到 %s", path)
    return path


def load_program(path: Union[str, Path]) -> Union[LinearProgram, QclProgram]:
    """从JSON文件加载规划问题

    Raises:
        SchemaError: 文件结构不正确时抛出
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = data.get("kind")
    if kind == "lp":
        return LinearProgram.from_mapping(data)
    if kind == "qclp":
        return QclProgram.from_mapping(data)
    raise SchemaError("未知的规划问题类型", path="$.kind", kind=kind)


def _block(A: Any, b: Any, n: int, label: str):
    b = np.asarray(b if b is not None else [], dtype=float).reshape(-1)
    A = np.asarray(A if A is not None else np.zeros((0, n)), dtype=float)
    A = A.reshape(b.size, n) if A.size == b.size * n else A
    if A.shape != (b.size, n):
        raise DimensionError(f"{label}约束矩阵维度错误", expected=(b.size, n), actual=A.shape)
    return np.array(A), np.array(b)


def _check_schema(data: Mapping[str, Any], kind: str) -> None:
    if data.get("schema") != PROGRAM_SCHEMA:
        raise SchemaError("规划文件的 schema 版本不受支持", path="$.schema", schema=data.get("schema"))
    if data.get("kind") != kind:
        raise SchemaError("规划问题类型不匹配", path="$.kind", expected=kind, actual=data.get("kind"))
