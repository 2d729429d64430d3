"""
状态相关丢包信道（SDDC）模块，提供了丢包概率表、瑞利衰落闭式表达式和
伯努利包命运采样的实现。

信道只能处于两种模式之一：
- 表格模式：直接给出每个 (状态, 功率等级) 的丢包概率 θ(s, p)
- 瑞利模式：θ(s, p) = 1 - exp(-N0γ0 / (2 p κ²(s) h̄²))
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from sddc.exceptions import UnknownLabelError, ValidationError

logger = logging.getLogger(__name__)

Label = Union[int, str]

# 概率和的容差
_PROB_TOL = 1e-12


@dataclass(frozen=True)
class RayleighFading:
    """瑞利衰落参数

    属性说明：
        n0_gamma0 (float): 噪声功率与信噪比门限的乘积 N0·γ0（合并为单一参数）
        kappa (Tuple[float, ...]): 每个状态的阴影函数值 κ(s) > 0
        h_bar (float): 多径衰落的瑞利尺度参数 h̄ > 0
    """
    n0_gamma0: float
    kappa: Tuple[float, ...]
    h_bar: float

    def __post_init__(self):
        if not math.isfinite(self.n0_gamma0) or self.n0_gamma0 < 0:
            raise ValidationError("N0·γ0 必须是非负有限数", n0_gamma0=self.n0_gamma0)
        if not math.isfinite(self.h_bar) or self.h_bar <= 0:
            raise ValidationError("尺度参数 h̄ 必须为正", h_bar=self.h_bar)
        for index, value in enumerate(self.kappa):
            if not math.isfinite(value) or value <= 0:
                raise ValidationError("阴影函数 κ(s) 必须为正", state=index, kappa=value)

    def outage(self, kappa: float, power: float) -> float:
        """计算给定阴影值和发射功率的中断概率"""
        exponent = self.n0_gamma0 / (2.0 * power * kappa ** 2 * self.h_bar ** 2)
        return float(-math.expm1(-exponent))


@dataclass(frozen=True)
class PowerChannel:
    """功率可控的状态相关丢包信道

    属性说明：
        states (Tuple[str, ...]): MDP状态标签，与 Mdp.states 一致
        levels (Tuple[str, ...]): 功率等级标签，按功率值升序排列
        power_values (np.ndarray): 功率值 p > 0，形状 (M,)
        power_cost (np.ndarray): 功率代价 c_p(s, p) >= 0，形状 (N, M)
        dropout (np.ndarray): 丢包概率 θ(s, p)，形状 (N, M)
        rayleigh (Optional[RayleighFading]): 瑞利模式参数，表格模式为 None
        allow_certain_loss (bool): 是否允许 θ = 1（仅用于仿真压力测试）

    示例：
        ```python
        channel = PowerChannel.from_table(
            states=["s1", "s2", "s3"],
            levels={"L": 1.0, "H": 2.0},
            table={"s1": {"L": 0.9, "H": 0.4},
                   "s2": {"L": 0.5, "H": 0.3},
                   "s3": {"L": 0.4, "H": 0.2}},
            power_cost={"L": 1.0, "H": 4.0},
        )
        channel.dropout_probability("s1", "L")  # 0.9
        ```
    """
    states: Tuple[str, ...]
    levels: Tuple[str, ...]
    power_values: np.ndarray
    power_cost: np.ndarray
    dropout: np.ndarray
    rayleigh: Optional[RayleighFading] = None
    allow_certain_loss: bool = False
    _state_index: Dict[str, int] = field(default_factory=dict, repr=False, compare=False)
    _level_index: Dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n, m = len(self.states), len(self.levels)
        values = _frozen(np.asarray(self.power_values, dtype=float))
        cost = _frozen(np.asarray(self.power_cost, dtype=float))
        theta = _frozen(np.asarray(self.dropout, dtype=float))
        object.__setattr__(self, "power_values", values)
        object.__setattr__(self, "power_cost", cost)
        object.__setattr__(self, "dropout", theta)
        object.__setattr__(self, "_state_index", {s: i for i, s in enumerate(self.states)})
        object.__setattr__(self, "_level_index", {p: j for j, p in enumerate(self.levels)})

        if n == 0 or m == 0:
            raise ValidationError("信道至少需要一个状态和一个功率等级")
        if len(self._state_index) != n or len(self._level_index) != m:
            raise ValidationError("状态或功率等级标签重复")
        if values.shape != (m,) or cost.shape != (n, m) or theta.shape != (n, m):
            raise ValidationError(
                "信道数组维度不一致",
                expected=(n, m), power_values=values.shape, power_cost=cost.shape, dropout=theta.shape,
            )
        if np.any(~np.isfinite(values)) or np.any(values <= 0):
            raise ValidationError("功率值必须为正")
        if np.any(np.diff(values) <= 0):
            raise ValidationError("功率等级必须按功率值严格升序排列", levels=list(self.levels))
        if np.any(~np.isfinite(cost)) or np.any(cost < 0):
            raise ValidationError("功率代价必须是非负有限数")
        upper_ok = theta <= 1.0 if self.allow_certain_loss else theta < 1.0
        bad = np.argwhere(~((theta >= 0.0) & upper_ok))
        if bad.size:
            s, p = bad[0]
            raise ValidationError(
                "丢包概率必须位于 [0, 1)",
                state=self.states[s], level=self.levels[p], value=float(theta[s, p]),
            )
        # 对每个状态，θ(s, ·) 关于功率单调不增
        rising = np.argwhere(np.diff(theta, axis=1) > 0)
        if rising.size:
            s, p = rising[0]
            raise ValidationError(
                "丢包概率必须随功率单调不增",
                state=self.states[s], level=self.levels[p + 1],
                lower=float(theta[s, p]), higher=float(theta[s, p + 1]),
            )

    @classmethod
    def from_table(
        cls,
        states: Sequence[str],
        levels: Mapping[str, float],
        table: Mapping[str, Mapping[str, float]],
        power_cost: Union[Mapping[str, float], Mapping[str, Mapping[str, float]]],
        allow_certain_loss: bool = False,
    ) -> "PowerChannel":
        """由丢包概率表构造表格模式信道

        Args:
            states: 状态标签
            levels: 功率等级标签到功率值的映射
            table: {状态: {功率等级: θ}} 形式的丢包概率表
            power_cost: {功率等级: 代价}，或按状态给出的 {状态: {功率等级: 代价}}
            allow_certain_loss: 是否允许 θ = 1

        Returns:
            PowerChannel: 表格模式信道

        Raises:
            ValidationError: 表格缺项、多余项或违反不变量时抛出
        """
        level_names, values = _sorted_levels(levels)
        theta = np.zeros((len(states), len(level_names)))
        if set(table) != set(states):
            raise ValidationError(
                "丢包概率表的状态与MDP状态不一致",
                missing=sorted(set(states) - set(table)), extra=sorted(set(table) - set(states)),
            )
        for i, s in enumerate(states):
            row = table[s]
            if set(row) != set(level_names):
                raise ValidationError("丢包概率表的功率等级不完整", state=s)
            for j, p in enumerate(level_names):
                theta[i, j] = float(row[p])
        cost = _broadcast_cost(states, level_names, power_cost)
        return cls(tuple(states), level_names, values, cost, theta,
                   allow_certain_loss=allow_certain_loss)

    @classmethod
    def from_rayleigh(
        cls,
        states: Sequence[str],
        levels: Mapping[str, float],
        n0_gamma0: float,
        kappa: Mapping[str, float],
        h_bar: float,
        power_cost: Union[Mapping[str, float], Mapping[str, Mapping[str, float]]],
    ) -> "PowerChannel":
        """由瑞利衰落参数构造信道

        θ(s, p) = 1 - exp(-N0γ0 / (2 p κ²(s) h̄²))，随功率与阴影值严格递减。

        Args:
            states: 状态标签
            levels: 功率等级标签到功率值的映射
            n0_gamma0: N0·γ0 乘积
            kappa: 每个状态的阴影函数值
            h_bar: 瑞利尺度参数
            power_cost: 功率代价

        Returns:
            PowerChannel: 瑞利模式信道
        """
        level_names, values = _sorted_levels(levels)
        if set(kappa) != set(states):
            raise ValidationError("阴影函数必须覆盖全部状态", missing=sorted(set(states) - set(kappa)))
        fading = RayleighFading(float(n0_gamma0), tuple(float(kappa[s]) for s in states), float(h_bar))
        theta = np.array([[fading.outage(k, p) for p in values] for k in fading.kappa])
        cost = _broadcast_cost(states, level_names, power_cost)
        return cls(tuple(states), level_names, values, cost, theta, rayleigh=fading)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def mode(self) -> str:
        return "rayleigh" if self.rayleigh is not None else "table"

    def state_index(self, s: Label) -> int:
        """解析状态标签或下标"""
        return _resolve(s, self._state_index, self.n_states, "状态")

    def level_index(self, p: Label) -> int:
        """解析功率等级标签或下标"""
        return _resolve(p, self._level_index, self.n_levels, "功率等级")

    def dropout_probability(self, s: Label, p: Label) -> float:
        """丢包概率 θ(s, p)

        Args:
            s: 状态标签或下标
            p: 功率等级标签或下标

        Returns:
            float: 丢包概率

        Raises:
            UnknownLabelError: 状态或功率等级不存在时抛出
        """
        i, j = self.state_index(s), self.level_index(p)
        if self.rayleigh is not None:
            return self.rayleigh.outage(self.rayleigh.kappa[i], float(self.power_values[j]))
        return float(self.dropout[i, j])

    def sample_gamma(self, s: Label, p: Label, rng: np.random.Generator) -> int:
        """采样包命运 γ：丢包返回0，成功接收返回1"""
        theta = self.dropout_probability(s, p)
        return 0 if rng.random() < theta else 1

    def theta_vector(self) -> np.ndarray:
        """按联合状态顺序（状态为主、功率为次）展开的丢包概率向量"""
        return self.dropout.reshape(-1).copy()

    def with_dropout(self, s: Label, p: Label, value: float) -> "PowerChannel":
        """返回修改单个丢包概率后的表格模式信道（用于参数扫描）"""
        theta = np.array(self.dropout, dtype=float)
        theta[self.state_index(s), self.level_index(p)] = float(value)
        return PowerChannel(self.states, self.levels, self.power_values, self.power_cost, theta,
                            allow_certain_loss=self.allow_certain_loss)

    def with_power_cost(self, cost: np.ndarray) -> "PowerChannel":
        return PowerChannel(self.states, self.levels, self.power_values, cost, self.dropout,
                            rayleigh=self.rayleigh, allow_certain_loss=self.allow_certain_loss)

    def to_mapping(self) -> Dict[str, Any]:
        """转换为场景文件中的信道描述"""
        mapping: Dict[str, Any] = {
            "levels": {p: float(v) for p, v in zip(self.levels, self.power_values)},
            "power_cost": {
                s: {p: float(self.power_cost[i, j]) for j, p in enumerate(self.levels)}
                for i, s in enumerate(self.states)
            },
        }
        if self.rayleigh is not None:
            mapping["rayleigh"] = {
                "n0_gamma0": self.rayleigh.n0_gamma0,
                "kappa": dict(zip(self.states, self.rayleigh.kappa)),
                "h_bar": self.rayleigh.h_bar,
            }
        else:
            mapping["dropout_table"] = {
                s: {p: float(self.dropout[i, j]) for j, p in enumerate(self.levels)}
                for i, s in enumerate(self.states)
            }
        return mapping


def dropout_probability(channel: PowerChannel, s: Label, p: Label) -> float:
    """丢包概率 θ(s, p)，参见 PowerChannel.dropout_probability"""
    return channel.dropout_probability(s, p)


def sample_gamma(channel: PowerChannel, s: Label, p: Label, rng: np.random.Generator) -> int:
    """以概率 θ(s, p) 返回0（丢包），否则返回1

    Args:
        channel: 信道
        s: 状态
        p: 功率等级
        rng: 显式传入的随机数发生器，固定种子下结果可复现

    Returns:
        int: 包命运 γ ∈ {0, 1}
    """
    return channel.sample_gamma(s, p, rng)


def _sorted_levels(levels: Mapping[str, float]) -> Tuple[Tuple[str, ...], np.ndarray]:
    if not levels:
        raise ValidationError("至少需要一个功率等级")
    ordered = sorted(levels.items(), key=lambda item: float(item[1]))
    return tuple(name for name, _ in ordered), np.array([float(v) for _, v in ordered])


def _broadcast_cost(states: Sequence[str], levels: Sequence[str], power_cost: Mapping[str, Any]) -> np.ndarray:
    cost = np.zeros((len(states), len(levels)))
    if set(power_cost) == set(levels):
        # 按功率等级给出的代价广播到全部状态
        for j, p in enumerate(levels):
            cost[:, j] = float(power_cost[p])
        return cost
    if set(power_cost) == set(states):
        for i, s in enumerate(states):
            row = power_cost[s]
            if not isinstance(row, Mapping) or set(row) != set(levels):
                raise ValidationError("按状态给出的功率代价必须覆盖全部功率等级", state=s)
            for j, p in enumerate(levels):
                cost[i, j] = float(row[p])
        return cost
    raise ValidationError("功率代价必须按功率等级或按 (状态, 功率等级) 给出")


def _resolve(label: Label, index: Mapping[str, int], size: int, kind: str) -> int:
    if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
        if 0 <= int(label) < size:
            return int(label)
        raise UnknownLabelError(f"{kind}下标越界", label=int(label), size=size)
    try:
        return index[label]
    except (KeyError, TypeError):
        raise UnknownLabelError(f"未知的{kind}", label=str(label))


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array
