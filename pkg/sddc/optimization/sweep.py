"""
参数扫描与协同设计/分离设计对比表。

对收敛率 η、单个丢包概率格 θ(s,p) 与功率代价权重 λ 的网格逐点求解协同设计与分离设计，
结果按输入网格的顺序排列，与线程数无关。
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from sddc.analysis.lyapunov import MlfCertificate
from sddc.config import SolverConfig
from sddc.model.channel import PowerChannel
from sddc.model.mdp import Mdp, PowerConditioning
from sddc.optimization.codesign import solve_codesign
from sddc.optimization.separation import (
    DOMINANCE_TOL,
    baseline_conditioning,
    baseline_safety,
    dominance_gap,
    separation_baseline,
)

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "eta", "theta", "cost_codesign", "cost_separation", "feasible_sep",
    "lambda", "method", "cell", "feasible_codesign", "conditioning", "codesign_dominates",
]

# 参考对比网格的数值，行为 θ，列为 η；None 表示分离设计无可行解
REFERENCE_ETAS = (0.4, 0.5, 0.6, 0.7)
REFERENCE_CODESIGN = {
    0.95: (5.66, 5.66, 5.66, 5.66),
    0.85: (4.05, 4.05, 4.05, 4.05),
    0.75: (2.99, 2.96, 2.90, 2.77),
    0.65: (2.73, 2.63, 2.45, 2.03),
}
REFERENCE_SEPARATION = {
    0.95: (None, None, None, None),
    0.85: (None, None, None, 7.33),
    0.75: (5.24, 5.04, 4.72, 4.12),
    0.65: (4.40, 4.0, 3.35, 2.09),
}
MATCH_TOL = 0.1


@dataclass(frozen=True)
class SweepPoint:
    eta: Optional[float]
    theta: Optional[float]
    lambda_weight: float


def sweep(
    mdp: Mdp,
    channel: PowerChannel,
    cert: MlfCertificate,
    etas: Sequence[Optional[float]],
    thetas: Optional[Sequence[float]] = None,
    cell: Tuple[str, str] = ("s1", "L"),
    lambdas: Sequence[float] = (1.0,),
    method: str = "lp",
    separation: bool = True,
    conditioning: PowerConditioning = PowerConditioning.DESTINATION,
    config: Optional[SolverConfig] = None,
    threads: int = 1,
) -> pd.DataFrame:
    """在 λ × θ × η 网格上对比协同设计与分离设计

    Args:
        mdp: MDP
        channel: 基准信道
        cert: 证书
        etas: 收敛率网格
        thetas: 单元 cell 的丢包概率取值；None 表示不修改信道
        cell: 被扫描的 (状态, 功率等级)
        lambdas: 功率代价权重
        method: 协同设计方法 "lp" 或 "qp"；分离设计相应施加期望意义或逐状态条件
        separation: 是否同时求解分离设计
        conditioning: 线性规划路径下分离设计功率阶段的条件变量；二次约束路径固定为当前状态，
            与协同设计约束的约定一致
        config: 求解器配置
        threads: 网格点并行的线程数

    Returns:
        pd.DataFrame: 列顺序见 SWEEP_COLUMNS，无可行解的代价为 NaN；conditioning 为分离设计
            实际使用的约定，codesign_dominates 为假表示协同设计代价高于分离设计

    示例：
        ```python
        frame = sweep(mdp, channel, cert, etas=[0.4, 0.5], thetas=[0.65, 0.75])
        frame[["eta", "theta", "cost_codesign"]]
        ```
    """
    config = config or SolverConfig()
    theta_values: Sequence[Optional[float]] = list(thetas) if thetas is not None else [None]
    points = [SweepPoint(eta, theta, lam) for lam, theta, eta in product(lambdas, theta_values, etas)]
    safety = baseline_safety(method)
    sep_conditioning = baseline_conditioning(method, conditioning)
    label = f"{cell[0]},{cell[1]}"

    def run(point: SweepPoint) -> Dict[str, Any]:
        local = channel if point.theta is None else channel.with_dropout(cell[0], cell[1], point.theta)
        sep = None
        if separation:
            sep = separation_baseline(mdp, local, cert, point.lambda_weight, point.eta, safety,
                                      sep_conditioning, config)
        seeds = [sep.policy] if sep is not None and sep.feasible else []
        co = solve_codesign(mdp, local, cert, point.lambda_weight, point.eta, method, config, seeds=seeds)
        gap = dominance_gap(co, sep) if sep is not None else None
        return {
            "eta": point.eta,
            "theta": point.theta if point.theta is not None else float(local.dropout[
                local.state_index(cell[0]), local.level_index(cell[1])]),
            "cost_codesign": co.optimal_cost if co.feasible else np.nan,
            "cost_separation": sep.optimal_cost if sep is not None and sep.feasible else np.nan,
            "feasible_sep": bool(sep is not None and sep.feasible),
            "lambda": point.lambda_weight,
            "method": method,
            "cell": label,
            "feasible_codesign": co.feasible,
            "conditioning": sep_conditioning.value,
            "codesign_dominates": gap is None or gap >= -DOMINANCE_TOL,
        }

    logger.info("参数扫描：%d 个网格点，%d 个线程", len(points), threads)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, points))
    else:
        rows = [run(point) for point in points]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


@dataclass
class GridReading:
    """一种 (λ, 扫描单元) 解读下的复现结果"""
    lambda_weight: float
    cell: Tuple[str, str]
    checks: Dict[str, bool]
    max_deviation: float
    frame: pd.DataFrame = field(repr=False)

    @property
    def structural(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.lambda_weight,
            "cell": list(self.cell),
            "checks": dict(self.checks),
            "structural": self.structural,
            "max_deviation": self.max_deviation,
        }


@dataclass
class GridReport:
    readings: List[GridReading]

    @property
    def best(self) -> GridReading:
        """优先结构检查全部通过的解读，其次取最大偏差最小者"""
        return min(self.readings, key=lambda r: (not r.structural, r.max_deviation))

    @property
    def matched(self) -> bool:
        best = self.best
        return best.structural and best.max_deviation <= MATCH_TOL

    def frame(self) -> pd.DataFrame:
        return pd.concat([r.frame for r in self.readings], ignore_index=True)

    def to_dict(self) -> Dict[str, Any]:
        best = self.best
        return {
            "readings": [r.to_dict() for r in self.readings],
            "best": {"lambda": best.lambda_weight, "cell": list(best.cell)},
            "matched": self.matched,
            "tolerance": MATCH_TOL,
        }


def reference_grid(
    mdp: Mdp,
    channel: PowerChannel,
    cert: MlfCertificate,
    lambdas: Sequence[float] = (0.25, 0.5, 1.0),
    cells: Sequence[Tuple[str, str]] = (("s1", "L"), ("s3", "L")),
    method: str = "lp",
    config: Optional[SolverConfig] = None,
    threads: int = 1,
) -> GridReport:
    """复现协同设计/分离设计对比表

    对每个 λ 和每个被扫描单元计算 θ ∈ {0.95, 0.85, 0.75, 0.65}、η ∈ {0.4, ..., 0.7}
    的网格，并检查：
    - 高衰落（0.95、0.85）下协同设计代价不随 η 变化
    - 低衰落（0.75、0.65）下协同设计代价随 η 严格下降
    - 分离设计无可行解的位置与参考值中的 N/A 完全一致
    - 两者均可行时协同设计代价不超过分离设计
    以及与参考数值的最大偏差。

    Returns:
        GridReport: 全部解读与最佳匹配
    """
    thetas = list(REFERENCE_CODESIGN)
    readings = []
    for lam, cell in product(lambdas, cells):
        frame = sweep(mdp, channel, cert, REFERENCE_ETAS, thetas, cell, (lam,), method,
                      config=config, threads=threads)
        checks, deviation = _score(frame)
        readings.append(GridReading(lam, tuple(cell), checks, deviation, frame))
        logger.info("λ=%s，单元 %s：结构检查 %s，最大偏差 %.4g", lam, cell, checks, deviation)
    report = GridReport(readings)
    if not report.matched:
        best = report.best
        logger.warning("对比表未在 ±%.2g 内复现；最佳解读 λ=%s，单元 %s，最大偏差 %.4g",
                       MATCH_TOL, best.lambda_weight, best.cell, best.max_deviation)
    return report


def _score(frame: pd.DataFrame) -> Tuple[Dict[str, bool], float]:
    constant, decreasing, pattern, dominance = True, True, True, True
    deviations = []
    for theta, group in frame.groupby("theta", sort=False):
        key = min(REFERENCE_CODESIGN, key=lambda t: abs(t - theta))
        group = group.sort_values("eta")
        co = group["cost_codesign"].to_numpy(dtype=float)
        sep = group["cost_separation"].to_numpy(dtype=float)
        if np.isnan(co).any():
            constant = decreasing = False
        elif key >= 0.85:
            constant &= bool(np.ptp(co) <= 1e-6)
        else:
            decreasing &= bool(np.all(np.diff(co) < -1e-9))
        reference_sep = REFERENCE_SEPARATION[key]
        pattern &= all(bool(f) == (p is not None) for f, p in zip(group["feasible_sep"], reference_sep))
        dominance &= bool(group["codesign_dominates"].all())
        deviations.extend(np.abs(co - np.asarray(REFERENCE_CODESIGN[key])))
        for value, expected in zip(sep, reference_sep):
            if expected is not None and not np.isnan(value):
                deviations.append(abs(value - expected))
    checks = {
        "constant_in_eta_high_fading": constant,
        "decreasing_in_eta_low_fading": decreasing,
        "separation_infeasible_pattern": pattern,
        "codesign_dominates": dominance,
    }
    finite = [d for d in deviations if np.isfinite(d)]
    return checks, float(max(finite)) if finite else float("inf")
