"""
网络控制系统的离散时间被控对象模块。

提供两类随机切换闭环：
- LinearSwitchedPlant: 线性对象 x⁺ = Fx + Gu + w，带零阶保持估计器
- CallableSwitchedPlant: 由用户回调 f_0、f_1 给出的非线性切换系统

增广状态 z = [x; x̂_prev]，其中 x̂_prev 为上一时刻的估计值。
包命运 γ = 1 表示本时刻的状态样本成功送达。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from sddc.exceptions import DimensionError, ValidationError

logger = logging.getLogger(__name__)

DROP_MODES = ("estimate", "zero_input")

# 直流电机参数（采样周期 0.3 s 的离散模型）
DC_MOTOR_F = ((1.0014, 0.0046), (0.0046, 0.0))
DC_MOTOR_G = (2.27, 7.6897)
DC_MOTOR_K = (-0.4055, -0.0024)
DC_MOTOR_T = 0.3


@dataclass(frozen=True)
class LinearSwitchedPlant:
    """带零阶保持估计器的线性网络控制系统

    估计器：x̂_k = γ_k x_k + (1 - γ_k) x̂_{k-1}

    drop_mode 决定丢包时的控制输入：
    - "estimate": u_k = K x̂_k（零阶保持估计器）
    - "zero_input": u_k = γ_k K x_k（丢包时不施加控制）

    属性说明：
        F (np.ndarray): 开环矩阵，形状 (n, n)
        G (np.ndarray): 输入矩阵，形状 (n, m)
        K (np.ndarray): 反馈增益，形状 (m, n)
        T (float): 采样周期（秒），仅用于标注
        disturbance_bound (float): 扰动上界 M_w >= 0（∞范数）
        drop_mode (str): 丢包时的控制方式

    Raises:
        ValidationError: 矩阵含非有限值、维度不一致或 F+GK 不是Schur稳定时抛出

    示例：
        ```python
        plant = dc_motor_preset()
        z = np.array([1.0, 0.0, 0.0, 0.0])
        step(plant, z, gamma=0, w=np.zeros(2))  # x⁺ = F x
        ```
    """
    F: np.ndarray
    G: np.ndarray
    K: np.ndarray
    T: float = 1.0
    disturbance_bound: float = 0.0
    drop_mode: str = "estimate"
    closed_loop: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        F = np.atleast_2d(np.array(self.F, dtype=float))
        G = np.array(self.G, dtype=float)
        K = np.array(self.K, dtype=float)
        n = F.shape[0]
        if F.shape != (n, n):
            raise DimensionError("F 必须是方阵", shape=F.shape)
        # 单输入时允许以向量给出 G 和 K
        G = G.reshape(n, -1) if G.ndim == 1 else G
        K = K.reshape(1, -1) if K.ndim == 1 else K
        if G.shape[0] != n or K.shape != (G.shape[1], n):
            raise DimensionError("G、K 与 F 的维度不一致", F=F.shape, G=G.shape, K=K.shape)
        for name, matrix in (("F", F), ("G", G), ("K", K)):
            if not np.all(np.isfinite(matrix)):
                raise ValidationError(f"{name} 含有非有限值")
        if self.drop_mode not in DROP_MODES:
            raise ValidationError("未知的丢包控制方式", drop_mode=self.drop_mode, allowed=list(DROP_MODES))
        if not math.isfinite(self.disturbance_bound) or self.disturbance_bound < 0:
            raise ValidationError("扰动上界必须是非负有限数", Mw=self.disturbance_bound)
        if not math.isfinite(self.T) or self.T <= 0:
            raise ValidationError("采样周期必须为正", T=self.T)

        closed = F + G @ K
        radius = spectral_radius(closed)
        if radius >= 1.0:
            raise ValidationError("闭环矩阵 F+GK 不是Schur稳定的", spectral_radius=radius)
        for matrix in (F, G, K, closed):
            matrix.setflags(write=False)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "closed_loop", closed)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "disturbance_bound", float(self.disturbance_bound))

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def is_linear(self) -> bool:
        return True

    def mode_matrices(self) -> Tuple[np.ndarray, np.ndarray]:
        """证书验证使用的两个模式矩阵 (F_0, F_1) = (F, F+GK)"""
        return self.F, self.closed_loop

    def control(self, x: np.ndarray, xhat: np.ndarray, gamma: int) -> np.ndarray:
        """当前时刻的控制输入"""
        if self.drop_mode == "zero_input":
            return self.K @ x if gamma else np.zeros(self.K.shape[0])
        return self.K @ xhat

    def step(self, z: np.ndarray, gamma: int, w: Optional[np.ndarray] = None) -> np.ndarray:
        x, xhat_prev = _split(z, self.n)
        w = _disturbance(w, self.n, self.disturbance_bound)
        xhat = x if gamma else xhat_prev
        u = self.control(x, xhat, gamma)
        x_next = self.F @ x + self.G @ u + w
        return np.concatenate([x_next, xhat])

    def to_mapping(self) -> Dict[str, Any]:
        """转换为场景文件中的线性对象描述（按行展开的矩阵）"""
        return {
            "F": self.F.tolist(),
            "G": self.G.tolist(),
            "K": self.K.tolist(),
            "T": self.T,
            "Mw": self.disturbance_bound,
            "drop_mode": self.drop_mode,
        }

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "LinearSwitchedPlant":
        return cls(
            F=np.array(data["F"], dtype=float),
            G=np.array(data["G"], dtype=float),
            K=np.array(data["K"], dtype=float),
            T=float(data.get("T", 1.0)),
            disturbance_bound=float(data.get("Mw", 0.0)),
            drop_mode=str(data.get("drop_mode", "estimate")),
        )

    def with_options(self, **changes: Any) -> "LinearSwitchedPlant":
        """返回修改部分参数后的新对象"""
        values = {
            "F": self.F, "G": self.G, "K": self.K, "T": self.T,
            "disturbance_bound": self.disturbance_bound, "drop_mode": self.drop_mode,
        }
        values.update(changes)
        return LinearSwitchedPlant(**values)


@dataclass(frozen=True)
class CallableSwitchedPlant:
    """由用户回调给出的切换系统

    f_0、f_1 的签名为 f(z, w) -> z⁺，z 为长度 2n 的增广状态。

    属性说明：
        n (int): 对象状态维数
        f0 (Callable): 丢包模式映射
        f1 (Callable): 送达模式映射
        disturbance_bound (float): 扰动上界 M_w
        T (float): 采样周期
    """
    n: int
    f0: Callable[[np.ndarray, np.ndarray], np.ndarray]
    f1: Callable[[np.ndarray, np.ndarray], np.ndarray]
    disturbance_bound: float = 0.0
    T: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("状态维数至少为1", n=self.n)
        if not math.isfinite(self.disturbance_bound) or self.disturbance_bound < 0:
            raise ValidationError("扰动上界必须是非负有限数", Mw=self.disturbance_bound)

    @property
    def is_linear(self) -> bool:
        return False

    def step(self, z: np.ndarray, gamma: int, w: Optional[np.ndarray] = None) -> np.ndarray:
        _split(z, self.n)
        w = _disturbance(w, self.n, self.disturbance_bound)
        mapping = self.f1 if gamma else self.f0
        out = np.asarray(mapping(np.asarray(z, dtype=float), w), dtype=float)
        if out.shape != (2 * self.n,):
            raise DimensionError("回调返回的增广状态维度错误", expected=2 * self.n, actual=out.shape)
        if not np.all(np.isfinite(out)):
            raise ValidationError("回调对有限输入返回了非有限值", gamma=gamma)
        return out


SwitchedPlant = Union[LinearSwitchedPlant, CallableSwitchedPlant]


@dataclass
class Trajectory:
    """单条闭环轨迹

    第 k 行记录 x_k、估计值 x̂_k、包命运 γ_k、MDP状态、功率等级、控制输入和代价；
    final_state 为最后一次更新后的 x_K。

    属性说明：
        x (np.ndarray): 状态，形状 (K, n)
        xhat (np.ndarray): 估计值，形状 (K, n)
        gamma (np.ndarray): 包命运，形状 (K,)
        u (np.ndarray): 控制输入，形状 (K, m)
        final_state (np.ndarray): x_K
        s (Optional[Sequence[str]]): MDP状态标签
        p (Optional[Sequence[str]]): 功率等级标签
        cost (Optional[np.ndarray]): 每步代价
        T (float): 采样周期
    """
    x: np.ndarray
    xhat: np.ndarray
    gamma: np.ndarray
    u: np.ndarray
    final_state: np.ndarray
    s: Optional[Sequence[str]] = None
    p: Optional[Sequence[str]] = None
    cost: Optional[np.ndarray] = None
    T: float = 1.0

    @property
    def horizon(self) -> int:
        return len(self.gamma)

    def states(self) -> np.ndarray:
        """x_0 … x_K，形状 (K+1, n)"""
        return np.vstack([self.x, self.final_state[None, :]])

    def to_frame(self) -> pd.DataFrame:
        """转换为 k,x1..xn,xhat1..xhatn,gamma,s,p,cost 列顺序的表格"""
        n = self.x.shape[1]
        horizon = self.horizon
        frame = pd.DataFrame({"k": np.arange(horizon + 1)})
        full_x = self.states()
        for i in range(n):
            frame[f"x{i + 1}"] = full_x[:, i]
        for i in range(n):
            frame[f"xhat{i + 1}"] = np.append(self.xhat[:, i], np.nan)
        frame["gamma"] = pd.array(list(self.gamma.astype(int)) + [None], dtype="Int64")
        frame["s"] = list(self.s) + [None] if self.s is not None else None
        frame["p"] = list(self.p) + [None] if self.p is not None else None
        frame["cost"] = np.append(self.cost, np.nan) if self.cost is not None else np.nan
        return frame


def step(
    plant: SwitchedPlant,
    z: np.ndarray,
    gamma: int,
    w: Optional[np.ndarray] = None,
) -> np.ndarray:
    """执行一步切换动态 z⁺ = f_γ(z, w)

    线性对象、"estimate" 方式：
    - γ = 1: x⁺ = Fx + GKx + w，x̂⁺ = x
    - γ = 0: x⁺ = Fx + GKx̂_prev + w，x̂⁺ = x̂_prev

    Args:
        plant: 被控对象
        z: 增广状态 [x; x̂_prev]
        gamma: 包命运，0 或 1
        w: 扰动，缺省为零

    Returns:
        np.ndarray: 下一增广状态

    Raises:
        ValidationError: 输入含非有限值、γ 不在 {0,1} 或 |w|∞ > M_w 时抛出
    """
    if gamma not in (0, 1):
        raise ValidationError("包命运必须为0或1", gamma=gamma)
    return plant.step(z, int(gamma), w)


def dc_motor_preset(drop_mode: str = "estimate", disturbance_bound: float = 0.0) -> LinearSwitchedPlant:
    """网络化直流电机模型

    Args:
        drop_mode: 丢包时的控制方式，默认为零阶保持估计器
        disturbance_bound: 扰动上界 M_w

    Returns:
        LinearSwitchedPlant: F、G、K 取给定的离散模型，T = 0.3 s
    """
    return LinearSwitchedPlant(
        F=np.array(DC_MOTOR_F),
        G=np.array(DC_MOTOR_G).reshape(2, 1),
        K=np.array(DC_MOTOR_K).reshape(1, 2),
        T=DC_MOTOR_T,
        disturbance_bound=disturbance_bound,
        drop_mode=drop_mode,
    )


def simulate_trajectory(
    plant: SwitchedPlant,
    x0: Sequence[float],
    gammas: Sequence[int],
    disturbances: Optional[np.ndarray] = None,
    xhat_init: Optional[Sequence[float]] = None,
    states: Optional[Sequence[str]] = None,
    levels: Optional[Sequence[str]] = None,
    costs: Optional[Sequence[float]] = None,
) -> Trajectory:
    """按给定的包命运序列推演一条轨迹

    Args:
        plant: 被控对象
        x0: 初始状态
        gammas: 包命运序列 γ_0 … γ_{K-1}
        disturbances: 扰动序列，形状 (K, n)，缺省为零
        xhat_init: 初始估计 x̂_{-1}，缺省为零
        states: 可选的MDP状态标签序列（仅记录）
        levels: 可选的功率等级标签序列（仅记录）
        costs: 可选的每步代价（仅记录）

    Returns:
        Trajectory: 轨迹记录
    """
    n = plant.n
    x = np.asarray(x0, dtype=float)
    if x.shape != (n,):
        raise DimensionError("初始状态维度错误", expected=n, actual=x.shape)
    xhat = np.zeros(n) if xhat_init is None else np.asarray(xhat_init, dtype=float)
    horizon = len(gammas)
    w_all = np.zeros((horizon, n)) if disturbances is None else np.asarray(disturbances, dtype=float)
    if w_all.shape != (horizon, n):
        raise DimensionError("扰动序列维度错误", expected=(horizon, n), actual=w_all.shape)

    xs, xhats, us = [], [], []
    for k, gamma in enumerate(gammas):
        z_next = step(plant, np.concatenate([x, xhat]), int(gamma), w_all[k])
        xhat = z_next[n:]
        xs.append(x)
        xhats.append(xhat)
        if isinstance(plant, LinearSwitchedPlant):
            us.append(plant.control(x, xhat, int(gamma)))
        x = z_next[:n]
    m = plant.K.shape[0] if isinstance(plant, LinearSwitchedPlant) else 0
    return Trajectory(
        x=np.array(xs).reshape(horizon, n),
        xhat=np.array(xhats).reshape(horizon, n),
        gamma=np.asarray(gammas, dtype=int),
        u=np.array(us).reshape(horizon, m),
        final_state=x,
        s=list(states) if states is not None else None,
        p=list(levels) if levels is not None else None,
        cost=np.asarray(costs, dtype=float) if costs is not None else None,
        T=plant.T,
    )


def spectral_radius(matrix: np.ndarray) -> float:
    """矩阵的谱半径"""
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(matrix, dtype=float)))))


def _split(z: np.ndarray, n: int) -> Tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=float)
    if z.shape != (2 * n,):
        raise DimensionError("增广状态维度错误", expected=2 * n, actual=z.shape)
    if not np.all(np.isfinite(z)):
        raise ValidationError("增广状态含有非有限值")
    return z[:n], z[n:]


def _disturbance(w: Optional[np.ndarray], n: int, bound: float) -> np.ndarray:
    if w is None:
        return np.zeros(n)
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape != (n,):
        raise DimensionError("扰动维度错误", expected=n, actual=w.shape)
    if not np.all(np.isfinite(w)):
        raise ValidationError("扰动含有非有限值")
    if np.max(np.abs(w), initial=0.0) > bound + 1e-12:
        raise ValidationError("扰动超出上界 M_w", bound=bound, norm=float(np.max(np.abs(w))))
    return w
