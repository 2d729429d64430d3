"""
蒙特卡洛仿真模块。

联合采样MDP状态、功率等级、包命运与对象状态的闭环路径，统计安全性与长期平均代价，
并与理论包络比较。

每步采样顺序：
1. a_k ~ μ^m(·|s_k)
2. s_{k+1} ~ p(·|s_k, a_k)
3. p_{k+1} ~ μ^p(·|s_{k+1})（目标状态约定）或 μ^p(·|s_k)（当前状态约定）
4. γ_{k+1} ~ 伯努利(1 - θ(s_{k+1}, p_{k+1}))
5. z_{k+1} = f_{γ_{k+1}}(z_k, w_k)

每条路径使用独立派生的随机数生成器，统计量按路径编号顺序汇总，结果与线程数无关。
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from sddc.exceptions import DimensionError, ValidationError
from sddc.model.channel import PowerChannel
from sddc.model.mdp import JointPolicy, Mdp, PowerConditioning, check_dimensions
from sddc.model.plant import SwitchedPlant
from sddc.simulation.rng import categorical, check_seed, path_generator
from sddc.simulation.statistics import StatisticsCalculator

logger = logging.getLogger(__name__)


@dataclass
class ScenarioRun:
    """一次蒙特卡洛运行的设置

    属性说明：
        seed (int): 64 位种子
        horizon (int): 步数 K
        paths (int): 路径数
        x0_scale (float): x_0 在 [-x0_scale, x0_scale]^n 上均匀采样
        x0 (Optional[Sequence[float]]): 固定初始状态，给出时忽略 x0_scale
        s0 (Optional[str]): 固定初始MDP状态，缺省为均匀采样
        disturbance_bound (Optional[float]): 扰动在 [-M_w, M_w]^n 上均匀采样，缺省取对象的 M_w
        conditioning (PowerConditioning): 功率策略的条件变量
        lyapunov_matrix (Optional[np.ndarray]): 计算经验 E[V(x_k)] 用的 P
        burn_in (int): 长期平均代价丢弃的前若干步
        lambda_weight (float): 功率代价权重 λ
        threads (int): 工作线程数
    """
    seed: int
    horizon: int = 40
    paths: int = 100
    x0_scale: float = 1.0
    x0: Optional[Sequence[float]] = None
    s0: Optional[str] = None
    disturbance_bound: Optional[float] = None
    conditioning: PowerConditioning = PowerConditioning.DESTINATION
    lyapunov_matrix: Optional[np.ndarray] = None
    burn_in: int = 0
    lambda_weight: float = 1.0
    threads: int = 1

    def __post_init__(self):
        self.seed = check_seed(self.seed)
        self.conditioning = PowerConditioning(self.conditioning)
        if self.horizon < 1 or self.paths < 1:
            raise ValidationError("步数与路径数至少为1", horizon=self.horizon, paths=self.paths)
        if not 0 <= self.burn_in < self.horizon:
            raise ValidationError("burn_in 必须位于 [0, horizon)", burn_in=self.burn_in, horizon=self.horizon)
        if self.x0_scale < 0:
            raise ValidationError("x0_scale 不能为负", x0_scale=self.x0_scale)
        if self.threads < 1:
            raise ValidationError("线程数至少为1", threads=self.threads)
        if self.lambda_weight <= 0:
            raise ValidationError("功率代价权重 λ 必须为正", lambda_weight=self.lambda_weight)
        if self.lyapunov_matrix is not None:
            self.lyapunov_matrix = np.asarray(self.lyapunov_matrix, dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "horizon": self.horizon,
            "paths": self.paths,
            "x0_scale": self.x0_scale,
            "x0": None if self.x0 is None else [float(v) for v in self.x0],
            "s0": self.s0,
            "disturbance_bound": self.disturbance_bound,
            "conditioning": self.conditioning.value,
            "burn_in": self.burn_in,
            "lambda": self.lambda_weight,
        }


@dataclass
class _Path:
    x: Optional[np.ndarray]
    states: np.ndarray
    levels: np.ndarray
    gammas: np.ndarray
    costs: np.ndarray
    finite: bool = True


@dataclass
class PathStats:
    """跨路径统计量

    属性说明：
        run (ScenarioRun): 运行设置（含种子）
        inf_norms (np.ndarray): |x_k|∞，形状 (paths, K+1)，发散路径在发散后为 NaN
        two_norms (np.ndarray): ‖x_k‖₂，形状同上
        lyapunov (Optional[np.ndarray]): V(x_k) = x_kᵀPx_k，形状同上
        states (np.ndarray): MDP状态下标，形状 (paths, K+1)
        levels (np.ndarray): 功率等级下标，形状 (paths, K+1)
        gammas (np.ndarray): 包命运，形状 (paths, K+1)，第0列为 -1
        costs (np.ndarray): 每步联合代价，形状 (paths, K)
        flagged (List[int]): 出现非有限状态的路径编号
        n_states (int): MDP状态数
    """
    run: ScenarioRun
    inf_norms: np.ndarray
    two_norms: np.ndarray
    lyapunov: Optional[np.ndarray]
    states: np.ndarray
    levels: np.ndarray
    gammas: np.ndarray
    costs: np.ndarray
    flagged: List[int] = field(default_factory=list)
    n_states: int = 0

    @property
    def horizon(self) -> int:
        return self.inf_norms.shape[1] - 1

    @property
    def max(self) -> np.ndarray:
        return np.nanmax(self.inf_norms, axis=0)

    @property
    def min(self) -> np.ndarray:
        return np.nanmin(self.inf_norms, axis=0)

    @property
    def mean(self) -> np.ndarray:
        return np.nanmean(self.inf_norms, axis=0)

    @property
    def mean_norm2(self) -> np.ndarray:
        return np.nanmean(self.two_norms, axis=0)

    @property
    def emp_EV(self) -> np.ndarray:
        if self.lyapunov is None:
            return np.full(self.horizon + 1, np.nan)
        return np.nanmean(self.lyapunov, axis=0)

    def exit_frequency(self, r: float, k_start: int = 0) -> float:
        """sup_{k >= k_start} |x_k|∞ >= r 的路径比例；发散路径计为离开"""
        if not 0 <= k_start <= self.horizon:
            raise ValidationError("k_start 超出范围", k_start=k_start, horizon=self.horizon)
        tail = self.inf_norms[:, k_start:]
        exited = np.any(np.nan_to_num(tail, nan=np.inf) >= r, axis=1)
        return float(np.mean(exited))

    def visit_frequencies(self, k_start: int = 1) -> np.ndarray:
        """k >= k_start 各步上各MDP状态的经验访问频率"""
        visits = self.states[:, k_start:].reshape(-1)
        counts = np.bincount(visits, minlength=self.n_states).astype(float)
        return counts / counts.sum()

    def path_costs(self) -> np.ndarray:
        """每条路径 burn_in 之后的时间平均代价"""
        return self.costs[:, self.run.burn_in:].mean(axis=1)

    @property
    def long_run_cost(self) -> float:
        return float(np.mean(self.path_costs()))

    @property
    def long_run_cost_se(self) -> float:
        return StatisticsCalculator.standard_error(self.path_costs())

    def to_frame(self, envelope: Optional[np.ndarray] = None) -> pd.DataFrame:
        """逐步统计表，列为 k,max,min,mean,emp_EV（给出包络时追加 envelope）"""
        frame = pd.DataFrame({
            "k": np.arange(self.horizon + 1),
            "max": self.max,
            "min": self.min,
            "mean": self.mean,
            "emp_EV": self.emp_EV,
        })
        if envelope is not None:
            envelope = np.asarray(envelope, dtype=float)
            if envelope.shape != (self.horizon + 1,):
                raise DimensionError("包络长度与步数不一致", expected=self.horizon + 1, actual=envelope.shape)
            frame["envelope"] = envelope
        frame["mean_norm2"] = self.mean_norm2
        return frame

    def summary(self) -> Dict[str, Any]:
        final = StatisticsCalculator.calculate_basic_stats(self.inf_norms[:, -1])
        return {
            "run": self.run.to_dict(),
            "flagged_paths": list(self.flagged),
            "final_inf_norm": final,
            "long_run_cost": self.long_run_cost,
            "long_run_cost_se": self.long_run_cost_se,
            "visit_frequencies": self.visit_frequencies().tolist(),
            "delivery_rate": float(np.mean(self.gammas[:, 1:] == 1)),
        }


@dataclass
class EnvelopeReport:
    """经验量与理论包络的逐步比较"""
    quantity: str
    empirical: np.ndarray
    envelope: np.ndarray
    ratio: np.ndarray
    fraction_below: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "k": np.arange(self.empirical.size),
            "empirical": self.empirical,
            "envelope": self.envelope,
            "ratio": self.ratio,
        })

    def to_dict(self) -> Dict[str, Any]:
        return {
            "quantity": self.quantity,
            "fraction_below": self.fraction_below,
            "max_ratio": float(np.nanmax(self.ratio)) if self.ratio.size else None,
        }


@dataclass
class LongRunCost:
    mean: float
    standard_error: float
    paths: int


def run_paths(
    run: ScenarioRun,
    mdp: Mdp,
    channel: PowerChannel,
    policy: JointPolicy,
    plant: Optional[SwitchedPlant],
) -> PathStats:
    """采样闭环路径并计算统计量

    Args:
        run: 运行设置
        mdp: MDP
        channel: 信道
        policy: 平稳联合策略
        plant: 被控对象；为 None 时只采样MDP与信道（对象统计量为 NaN）

    Returns:
        PathStats: 跨路径统计量

    Raises:
        DimensionError: 维度不一致时抛出
        UnknownLabelError: s0 不是已知状态时抛出
    """
    check_dimensions(mdp, channel, policy)
    s0 = None if run.s0 is None else mdp.state_index(run.s0)
    n = plant.n if plant is not None else 0
    if run.lyapunov_matrix is not None and run.lyapunov_matrix.shape != (n, n):
        raise DimensionError("Lyapunov矩阵维度错误", expected=(n, n), actual=run.lyapunov_matrix.shape)
    if run.x0 is not None and np.asarray(run.x0).shape != (n,):
        raise DimensionError("初始状态维度错误", expected=n, actual=np.asarray(run.x0).shape)
    bound = run.disturbance_bound
    if bound is None:
        bound = plant.disturbance_bound if plant is not None else 0.0
    elif plant is not None and bound > plant.disturbance_bound:
        raise ValidationError("扰动采样范围超出对象的 M_w", bound=bound, Mw=plant.disturbance_bound)

    context = _Context(run, mdp, channel, policy, plant, s0, bound)
    indices = range(run.paths)
    if run.threads > 1:
        with ThreadPoolExecutor(max_workers=run.threads) as pool:
            results = list(pool.map(context.sample, indices))
    else:
        results = [context.sample(i) for i in indices]

    flagged = [i for i, path in enumerate(results) if not path.finite]
    if flagged:
        logger.warning("%d 条路径出现非有限状态: %s", len(flagged), flagged)
    horizon = run.horizon
    if plant is not None:
        xs = np.stack([path.x for path in results])
        inf_norms = np.max(np.abs(xs), axis=2)
        two_norms = np.linalg.norm(xs, axis=2)
        lyapunov = None
        if run.lyapunov_matrix is not None:
            lyapunov = np.einsum("pki,ij,pkj->pk", xs, run.lyapunov_matrix, xs)
    else:
        inf_norms = np.full((run.paths, horizon + 1), np.nan)
        two_norms = inf_norms.copy()
        lyapunov = None
    stats = PathStats(
        run=run,
        inf_norms=inf_norms,
        two_norms=two_norms,
        lyapunov=lyapunov,
        states=np.stack([path.states for path in results]),
        levels=np.stack([path.levels for path in results]),
        gammas=np.stack([path.gammas for path in results]),
        costs=np.stack([path.costs for path in results]),
        flagged=flagged,
        n_states=mdp.n_states,
    )
    logger.info("完成 %d 条路径 × %d 步的仿真（种子 %d）", run.paths, horizon, run.seed)
    return stats


def empirical_vs_envelope(stats: PathStats, envelope: Sequence[float], quantity: str = "V") -> EnvelopeReport:
    """逐步比较经验量与理论包络

    Args:
        stats: 路径统计量
        envelope: 长度 K+1 的包络
        quantity: "V" 比较经验 E[V(x_k)]；"norm2" 比较经验平均 ‖x_k‖₂

    Returns:
        EnvelopeReport: 逐步比值与经验值不超过包络的步数比例
    """
    envelope = np.asarray(envelope, dtype=float)
    if quantity == "V":
        empirical = stats.emp_EV
    elif quantity == "norm2":
        empirical = stats.mean_norm2
    else:
        raise ValidationError("未知的比较量", quantity=quantity, allowed=["V", "norm2"])
    if envelope.shape != empirical.shape:
        raise DimensionError("包络长度与步数不一致", expected=empirical.shape, actual=envelope.shape)
    ratio = np.divide(empirical, envelope, out=np.full(empirical.shape, np.inf), where=envelope > 0)
    ratio[(envelope <= 0) & (empirical <= 0)] = 0.0
    fraction = StatisticsCalculator.containment_fraction(empirical, envelope)
    return EnvelopeReport(quantity, empirical, envelope, ratio, fraction)


def estimate_long_run_cost(
    run: ScenarioRun,
    mdp: Mdp,
    channel: PowerChannel,
    policy: JointPolicy,
    burn_in: Optional[int] = None,
) -> LongRunCost:
    """估计长期平均联合代价 c_M(s_k, a_k) + λ c_p(s_k, p_k)

    Args:
        run: 运行设置（使用其中的 λ、路径数与步数）
        mdp: MDP
        channel: 信道
        policy: 单链策略
        burn_in: 覆盖 run.burn_in

    Returns:
        LongRunCost: 跨路径均值与标准误
    """
    if burn_in is not None:
        if not 0 <= burn_in < run.horizon:
            raise ValidationError("burn_in 必须位于 [0, horizon)", burn_in=burn_in, horizon=run.horizon)
        run = replace(run, burn_in=burn_in)
    stats = run_paths(run, mdp, channel, policy, plant=None)
    return LongRunCost(stats.long_run_cost, stats.long_run_cost_se, run.paths)


class _Context:
    """单条路径的采样器，所有路径共享只读数据"""

    def __init__(self, run, mdp, channel, policy, plant, s0, bound):
        self.run = run
        self.mdp = mdp
        self.channel = channel
        self.plant = plant
        self.s0 = s0
        self.bound = bound
        self.control_rows = policy.control_rows()
        self.power = policy.power
        self.cost_pairs = mdp.stage_cost
        self.power_cost = run.lambda_weight * channel.power_cost
        self.source = run.conditioning is PowerConditioning.SOURCE

    def sample(self, index: int) -> _Path:
        run, mdp, plant = self.run, self.mdp, self.plant
        rng = path_generator(run.seed, index)
        horizon = run.horizon
        states = np.empty(horizon + 1, dtype=np.int64)
        levels = np.empty(horizon + 1, dtype=np.int64)
        gammas = np.full(horizon + 1, -1, dtype=np.int64)
        costs = np.empty(horizon)

        s = self.s0 if self.s0 is not None else int(rng.integers(mdp.n_states))
        p = categorical(rng, self.power[s])
        states[0], levels[0] = s, p

        xs = None
        z = None
        if plant is not None:
            n = plant.n
            xs = np.full((horizon + 1, n), np.nan)
            x0 = (np.asarray(run.x0, dtype=float) if run.x0 is not None
                  else rng.uniform(-run.x0_scale, run.x0_scale, size=n))
            z = np.concatenate([x0, np.zeros(n)])
            xs[0] = x0
        finite = True

        for k in range(horizon):
            a = categorical(rng, self.control_rows[s])
            pair = int(mdp.offsets[s]) + a
            costs[k] = self.cost_pairs[pair] + self.power_cost[s, p]
            s_next = categorical(rng, mdp.transition[pair])
            p = categorical(rng, self.power[s if self.source else s_next])
            s = s_next
            gamma = 0 if rng.random() < self.channel.dropout[s, p] else 1
            states[k + 1], levels[k + 1], gammas[k + 1] = s, p, gamma
            if plant is not None:
                w = rng.uniform(-self.bound, self.bound, size=plant.n) if self.bound > 0 else None
                if finite:
                    try:
                        with np.errstate(over="ignore", invalid="ignore"):
                            z = plant.step(z, gamma, w)
                    except DimensionError:
                        raise
                    except ValidationError as exc:
                        logger.debug("路径 %d 在第 %d 步失效: %s", index, k, exc)
                        z = np.full(2 * plant.n, np.nan)
                    if np.all(np.isfinite(z)):
                        xs[k + 1] = z[:plant.n]
                    else:
                        finite = False
        return _Path(xs, states, levels, gammas, costs, finite)
