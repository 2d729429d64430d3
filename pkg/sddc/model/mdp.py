"""
有限MDP与联合（状态, 功率）马尔可夫链模块。

提供MDP与平稳联合策略的构造和验证、联合转移矩阵 P̄ 的计算、
单链（unichain）与非周期性诊断以及平稳分布的求解。

矩阵统一按行随机存储：P̄[i, j] 为从联合状态 i 转移到 j 的概率，
联合状态 (s, p) 的下标为 s * M + p（状态为主、功率为次）。
"""
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from sddc.config import ChainConfig
from sddc.exceptions import ConvergenceError, DimensionError, UnknownLabelError, ValidationError
from sddc.model.channel import PowerChannel

logger = logging.getLogger(__name__)

Label = Union[int, str]

# 概率和的容差
PROB_TOL = 1e-12
# 联合链行和的容差
ROW_TOL = 1e-10
# 幂迭代残差连续这么多次检查没有创新低时视为停滞（周期链）
STALL_CHECKS = 50


class PowerConditioning(str, Enum):
    """功率策略的条件变量

    DESTINATION: 下一时隙的功率按目标状态 s' 选取，μ^p(p'|s')（默认）
    SOURCE: 下一时隙的功率按当前状态 s 选取，μ^p(p'|s)
    """
    DESTINATION = "destination"
    SOURCE = "source"


@dataclass(frozen=True)
class Mdp:
    """有限状态有限动作的马尔可夫决策过程

    状态-动作对按状态顺序展平：状态 s 的动作占据 offsets[s]:offsets[s+1]。

    属性说明：
        states (Tuple[str, ...]): 状态标签
        actions (Tuple[Tuple[str, ...], ...]): 每个状态可用的动作标签
        transition (np.ndarray): 转移概率 p(s'|s,a)，形状 (状态-动作对数, N)
        stage_cost (np.ndarray): 阶段代价 c_M(s,a)，形状 (状态-动作对数,)

    示例：
        ```python
        mdp = Mdp.from_mapping({
            "states": ["s1", "s2"],
            "actions": {
                "s1": {"a": {"transition": {"s1": 0.5, "s2": 0.5}, "cost": 1.0}},
                "s2": {"b": {"transition": {"s1": 1.0}, "cost": 2.0}},
            },
        })
        mdp.pair_index("s1", "a")  # 0
        ```
    """
    states: Tuple[str, ...]
    actions: Tuple[Tuple[str, ...], ...]
    transition: np.ndarray
    stage_cost: np.ndarray
    offsets: np.ndarray = field(init=False, repr=False, compare=False)
    pair_state: np.ndarray = field(init=False, repr=False, compare=False)
    _state_index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        states = tuple(str(s) for s in self.states)
        actions = tuple(tuple(str(a) for a in row) for row in self.actions)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)
        n = len(states)
        if n == 0:
            raise ValidationError("MDP至少需要一个状态")
        if len(set(states)) != n:
            raise ValidationError("状态标签重复", states=list(states))
        if len(actions) != n:
            raise DimensionError("动作集合数量与状态数不一致", states=n, action_sets=len(actions))
        for s, row in zip(states, actions):
            if not row:
                raise ValidationError("每个状态至少需要一个动作", state=s)
            if len(set(row)) != len(row):
                raise ValidationError("同一状态下动作标签重复", state=s)

        counts = np.array([len(row) for row in actions], dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        n_pairs = int(offsets[-1])
        transition = np.array(self.transition, dtype=float)
        cost = np.array(self.stage_cost, dtype=float)
        if transition.shape != (n_pairs, n):
            raise DimensionError("转移矩阵维度错误", expected=(n_pairs, n), actual=transition.shape)
        if cost.shape != (n_pairs,):
            raise DimensionError("阶段代价维度错误", expected=(n_pairs,), actual=cost.shape)

        pair_state = np.repeat(np.arange(n), counts)
        for k in range(n_pairs):
            s = states[pair_state[k]]
            a = actions[pair_state[k]][k - offsets[pair_state[k]]]
            row = transition[k]
            if np.any(~np.isfinite(row)) or np.any(row < 0) or np.any(row > 1):
                raise ValidationError("转移概率必须位于 [0, 1]", state=s, action=a)
            if abs(row.sum() - 1.0) > PROB_TOL:
                raise ValidationError("转移概率之和必须为1", state=s, action=a, total=float(row.sum()))
            if not math.isfinite(cost[k]) or cost[k] < 0:
                raise ValidationError("阶段代价必须是非负有限数", state=s, action=a, cost=float(cost[k]))

        transition.setflags(write=False)
        cost.setflags(write=False)
        offsets.setflags(write=False)
        pair_state.setflags(write=False)
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "stage_cost", cost)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "pair_state", pair_state)
        object.__setattr__(self, "_state_index", {s: i for i, s in enumerate(states)})

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "Mdp":
        """由场景文件中的字典构造MDP

        Args:
            data: {"states": [...], "actions": {s: {a: {"transition": {s': p}, "cost": c}}}}

        Returns:
            Mdp: MDP实例

        Raises:
            ValidationError: 转移目标不是已知状态或字段缺失时抛出
        """
        states = [str(s) for s in data["states"]]
        index = {s: i for i, s in enumerate(states)}
        action_map = data["actions"]
        if set(action_map) != set(states):
            raise ValidationError(
                "动作表的状态与状态列表不一致",
                missing=sorted(set(states) - set(action_map)), extra=sorted(set(action_map) - set(states)),
            )
        actions, rows, costs = [], [], []
        for s in states:
            labels = []
            for a, entry in action_map[s].items():
                row = np.zeros(len(states))
                for target, prob in entry["transition"].items():
                    if target not in index:
                        raise UnknownLabelError("转移目标不是已知状态", state=s, action=a, target=target)
                    row[index[target]] = float(prob)
                labels.append(a)
                rows.append(row)
                costs.append(float(entry["cost"]))
            actions.append(tuple(labels))
        return cls(tuple(states), tuple(actions), np.array(rows).reshape(-1, len(states)), np.array(costs))

    def to_mapping(self) -> Dict[str, Any]:
        """转换为场景文件中的MDP描述（只保留非零转移）"""
        actions: Dict[str, Any] = {}
        for i, s in enumerate(self.states):
            actions[s] = {}
            for k, a in zip(range(self.offsets[i], self.offsets[i + 1]), self.actions[i]):
                row = self.transition[k]
                actions[s][a] = {
                    "transition": {self.states[j]: float(row[j]) for j in np.flatnonzero(row)},
                    "cost": float(self.stage_cost[k]),
                }
        return {"states": list(self.states), "actions": actions}

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_pairs(self) -> int:
        return int(self.offsets[-1])

    @property
    def action_counts(self) -> Tuple[int, ...]:
        return tuple(len(row) for row in self.actions)

    def state_index(self, s: Label) -> int:
        """解析状态标签或下标"""
        if isinstance(s, (int, np.integer)) and not isinstance(s, bool):
            if 0 <= int(s) < self.n_states:
                return int(s)
            raise UnknownLabelError("状态下标越界", label=int(s), size=self.n_states)
        try:
            return self._state_index[s]
        except (KeyError, TypeError):
            raise UnknownLabelError("未知的状态", label=str(s))

    def action_slice(self, s: Label) -> slice:
        """状态 s 的动作在展平数组中的区间"""
        i = self.state_index(s)
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def pair_index(self, s: Label, a: Label) -> int:
        """状态-动作对 (s, a) 的展平下标

        Raises:
            UnknownLabelError: 动作不属于该状态时抛出
        """
        i = self.state_index(s)
        labels = self.actions[i]
        if isinstance(a, (int, np.integer)) and not isinstance(a, bool):
            j = int(a)
            if not 0 <= j < len(labels):
                raise UnknownLabelError("动作下标越界", state=self.states[i], label=j)
        else:
            if a not in labels:
                raise UnknownLabelError("未知的动作", state=self.states[i], label=str(a))
            j = labels.index(a)
        return int(self.offsets[i]) + j

    def permuted(self, order: Sequence[int]) -> "Mdp":
        """按新顺序重排状态（order[i] 为新第 i 个状态的原下标）"""
        order = list(order)
        if sorted(order) != list(range(self.n_states)):
            raise ValidationError("排列不合法", order=order)
        rows, costs = [], []
        for old in order:
            block = slice(int(self.offsets[old]), int(self.offsets[old + 1]))
            rows.append(self.transition[block][:, order])
            costs.append(self.stage_cost[block])
        return Mdp(
            tuple(self.states[i] for i in order),
            tuple(self.actions[i] for i in order),
            np.vstack(rows),
            np.concatenate(costs),
        )


@dataclass(frozen=True)
class JointPolicy:
    """平稳随机联合策略

    属性说明：
        control (np.ndarray): 控制策略 μ^m(a|s)，按状态-动作对展平，形状 (状态-动作对数,)
        power (np.ndarray): 功率策略 μ^p(p|s)，形状 (N, M)
        action_counts (Tuple[int, ...]): 每个状态的动作数，用于切分 control

    示例：
        ```python
        policy = JointPolicy.deterministic(mdp, channel, actions=["a1", "a2", "a3"], powers="H")
        policy.control_of("s1")  # array([1., 0.])
        ```
    """
    control: np.ndarray
    power: np.ndarray
    action_counts: Tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.action_counts)
        control = np.array(self.control, dtype=float)
        power = np.array(self.power, dtype=float)
        object.__setattr__(self, "action_counts", counts)
        if control.shape != (sum(counts),):
            raise DimensionError("控制策略长度与状态-动作对数不一致", expected=sum(counts), actual=control.shape)
        if power.ndim != 2 or power.shape[0] != len(counts):
            raise DimensionError("功率策略的行数必须等于状态数", expected=len(counts), actual=power.shape)
        start = 0
        for i, count in enumerate(counts):
            _check_distribution(control[start:start + count], "控制策略", state=i)
            start += count
        for i in range(power.shape[0]):
            _check_distribution(power[i], "功率策略", state=i)
        control.setflags(write=False)
        power.setflags(write=False)
        object.__setattr__(self, "control", control)
        object.__setattr__(self, "power", power)

    @property
    def n_states(self) -> int:
        return len(self.action_counts)

    @property
    def n_levels(self) -> int:
        return int(self.power.shape[1])

    def control_rows(self) -> List[np.ndarray]:
        """按状态切分的控制分布列表"""
        bounds = np.concatenate([[0], np.cumsum(self.action_counts)])
        return [self.control[bounds[i]:bounds[i + 1]] for i in range(self.n_states)]

    def control_of(self, s: int) -> np.ndarray:
        return self.control_rows()[s]

    @classmethod
    def from_rows(cls, control_rows: Sequence[Sequence[float]], power: Sequence[Sequence[float]]) -> "JointPolicy":
        """由按状态给出的控制分布行与功率分布矩阵构造"""
        rows = [np.asarray(r, dtype=float) for r in control_rows]
        return cls(np.concatenate(rows) if rows else np.zeros(0), np.asarray(power, dtype=float),
                   tuple(len(r) for r in rows))

    @classmethod
    def uniform(cls, mdp: Mdp, channel: PowerChannel) -> "JointPolicy":
        """每个状态上控制和功率都均匀随机的策略"""
        rows = [np.full(c, 1.0 / c) for c in mdp.action_counts]
        power = np.full((mdp.n_states, channel.n_levels), 1.0 / channel.n_levels)
        return cls.from_rows(rows, power)

    @classmethod
    def deterministic(
        cls,
        mdp: Mdp,
        channel: PowerChannel,
        actions: Sequence[Label],
        powers: Union[Label, Sequence[Label]],
    ) -> "JointPolicy":
        """确定性策略

        Args:
            mdp: MDP
            channel: 信道
            actions: 每个状态选择的动作（标签或下标）
            powers: 每个状态选择的功率等级，给出单个值时对所有状态相同

        Returns:
            JointPolicy: 确定性联合策略
        """
        if len(actions) != mdp.n_states:
            raise DimensionError("确定性动作数量与状态数不一致", expected=mdp.n_states, actual=len(actions))
        if isinstance(powers, (str, int, np.integer)):
            powers = [powers] * mdp.n_states
        if len(powers) != mdp.n_states:
            raise DimensionError("确定性功率数量与状态数不一致", expected=mdp.n_states, actual=len(powers))
        control = np.zeros(mdp.n_pairs)
        power = np.zeros((mdp.n_states, channel.n_levels))
        for i in range(mdp.n_states):
            control[mdp.pair_index(i, actions[i])] = 1.0
            power[i, channel.level_index(powers[i])] = 1.0
        return cls(control, power, mdp.action_counts)

    @classmethod
    def from_mapping(cls, mdp: Mdp, channel: PowerChannel, data: Mapping[str, Any]) -> "JointPolicy":
        """由 {"control": {s: {a: prob}}, "power": {s: {p: prob}}} 构造策略，缺省项视为0"""
        control = np.zeros(mdp.n_pairs)
        power = np.zeros((mdp.n_states, channel.n_levels))
        for s, row in data.get("control", {}).items():
            for a, prob in row.items():
                control[mdp.pair_index(s, a)] = float(prob)
        for s, row in data.get("power", {}).items():
            i = mdp.state_index(s)
            for p, prob in row.items():
                power[i, channel.level_index(p)] = float(prob)
        return cls(control, power, mdp.action_counts)

    def to_mapping(self, mdp: Mdp, channel: PowerChannel) -> Dict[str, Any]:
        """转换为策略表字典"""
        check_dimensions(mdp, channel, self)
        rows = self.control_rows()
        return {
            "control": {
                s: {a: float(rows[i][j]) for j, a in enumerate(mdp.actions[i])}
                for i, s in enumerate(mdp.states)
            },
            "power": {
                s: {p: float(self.power[i, j]) for j, p in enumerate(channel.levels)}
                for i, s in enumerate(mdp.states)
            },
        }

    def permuted(self, order: Sequence[int]) -> "JointPolicy":
        """与 Mdp.permuted 一致地重排状态"""
        rows = self.control_rows()
        return JointPolicy.from_rows([rows[i] for i in order], self.power[list(order)])


@dataclass(frozen=True)
class JointChain:
    """联合（状态, 功率）马尔可夫链

    属性说明：
        matrix (np.ndarray): 行随机转移矩阵 P̄，形状 (N·M, N·M)
        states (Tuple[str, ...]): 状态标签
        levels (Tuple[str, ...]): 功率等级标签
        conditioning (PowerConditioning): 构造时使用的功率条件变量
    """
    matrix: np.ndarray
    states: Tuple[str, ...]
    levels: Tuple[str, ...]
    conditioning: PowerConditioning = PowerConditioning.DESTINATION

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        size = len(self.states) * len(self.levels)
        if matrix.shape != (size, size):
            raise DimensionError("联合转移矩阵维度错误", expected=(size, size), actual=matrix.shape)
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def index(self, s: int, p: int) -> int:
        """联合状态 (s, p) 的下标"""
        return s * len(self.levels) + p

    def labels(self) -> List[Tuple[str, str]]:
        """按下标顺序列出联合状态标签"""
        return [(s, p) for s in self.states for p in self.levels]


@dataclass(frozen=True)
class ChainDiagnostic:
    """马尔可夫链结构诊断

    属性说明：
        recurrent_classes (List[List[int]]): 常返类（无出边的强连通分量）
        periods (List[int]): 每个常返类的周期
        transient (List[int]): 瞬态状态
        unichain (bool): 是否恰有一个常返类
        aperiodic (bool): 唯一常返类是否非周期
    """
    recurrent_classes: List[List[int]]
    periods: List[int]
    transient: List[int]

    @property
    def unichain(self) -> bool:
        return len(self.recurrent_classes) == 1

    @property
    def aperiodic(self) -> bool:
        return self.unichain and self.periods[0] == 1

    @property
    def ok(self) -> bool:
        return self.unichain and self.aperiodic

    def describe(self, labels: Optional[Sequence[Any]] = None) -> Dict[str, Any]:
        """生成带标签的诊断字典"""
        name = (lambda i: labels[i]) if labels is not None else (lambda i: i)
        return {
            "unichain": self.unichain,
            "aperiodic": self.aperiodic,
            "recurrent_classes": [[name(i) for i in c] for c in self.recurrent_classes],
            "periods": list(self.periods),
            "transient": [name(i) for i in self.transient],
        }


def check_dimensions(mdp: Mdp, channel: PowerChannel, policy: JointPolicy) -> None:
    """检查MDP、信道与策略的维度是否一致

    Raises:
        DimensionError: 不一致时抛出，并指出出错的状态
    """
    if channel.states != mdp.states:
        raise DimensionError("信道状态与MDP状态不一致", mdp=list(mdp.states), channel=list(channel.states))
    if policy.n_states != mdp.n_states:
        raise DimensionError("策略状态数与MDP不一致", expected=mdp.n_states, actual=policy.n_states)
    for i, (expected, actual) in enumerate(zip(mdp.action_counts, policy.action_counts)):
        if expected != actual:
            raise DimensionError("策略动作数与MDP不一致", state=mdp.states[i], expected=expected, actual=actual)
    if policy.n_levels != channel.n_levels:
        raise DimensionError("功率策略的等级数与信道不一致", expected=channel.n_levels, actual=policy.n_levels)


def state_chain(mdp: Mdp, policy: JointPolicy) -> np.ndarray:
    """控制策略诱导的状态链 P_μ(s'|s) = Σ_a p(s'|s,a) μ^m(a|s)

    Returns:
        np.ndarray: 行随机矩阵，形状 (N, N)
    """
    if policy.action_counts != mdp.action_counts:
        raise DimensionError("策略动作数与MDP不一致", expected=mdp.action_counts, actual=policy.action_counts)
    weighted = mdp.transition * policy.control[:, None]
    matrix = np.zeros((mdp.n_states, mdp.n_states))
    np.add.at(matrix, mdp.pair_state, weighted)
    return matrix


def joint_chain(
    mdp: Mdp,
    channel: PowerChannel,
    policy: JointPolicy,
    conditioning: PowerConditioning = PowerConditioning.DESTINATION,
) -> JointChain:
    """构造联合（状态, 功率）马尔可夫链

    DESTINATION: P̄((s,p),(s',p')) = μ^p(p'|s') · P_μ(s'|s)
    SOURCE:      P̄((s,p),(s',p')) = μ^p(p'|s)  · P_μ(s'|s)

    两种约定下 P̄ 都与当前功率 p 无关。

    Args:
        mdp: MDP
        channel: 信道
        policy: 平稳联合策略
        conditioning: 功率策略的条件变量

    Returns:
        JointChain: 行随机的联合链

    Raises:
        DimensionError: 维度不一致时抛出
    """
    check_dimensions(mdp, channel, policy)
    conditioning = PowerConditioning(conditioning)
    n, m = mdp.n_states, channel.n_levels
    base = state_chain(mdp, policy)
    mu = policy.power
    if conditioning is PowerConditioning.DESTINATION:
        block = base[:, :, None] * mu[None, :, :]
    else:
        block = base[:, :, None] * mu[:, None, :]
    # block[s, s', p'] 对所有当前功率 p 相同
    matrix = np.repeat(block.reshape(n, n * m), m, axis=0)
    worst = float(np.max(np.abs(matrix.sum(axis=1) - 1.0)))
    if worst > ROW_TOL:
        raise ValidationError("联合转移矩阵不是行随机的", max_row_error=worst)
    return JointChain(matrix, mdp.states, channel.levels, conditioning)


def stationary_distribution(
    chain: Union[JointChain, np.ndarray],
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    check_every: int = 10,
    config: Optional[ChainConfig] = None,
) -> np.ndarray:
    """求解平稳分布 π̄ᵀP̄ = π̄ᵀ

    先用幂迭代，达到 max_iter 仍不收敛或残差停滞（周期链）时退回到线性方程组
    (P̄ᵀ - I)π = 0, Σπ = 1 的最小二乘解。

    Args:
        chain: 联合链或任意行随机矩阵
        tol: 残差 ‖π̄ᵀP̄ - π̄ᵀ‖∞ 的容差，缺省取 config.tol
        max_iter: 幂迭代最大次数，缺省取 config.max_iter
        check_every: 每隔多少次迭代检查一次残差
        config: 马尔可夫链计算配置，缺省为 ChainConfig()

    Returns:
        np.ndarray: 平稳分布

    Raises:
        ConvergenceError: 两种方法都无法达到容差时抛出，携带最后的残差
    """
    config = config or ChainConfig()
    tol = config.tol if tol is None else tol
    max_iter = config.max_iter if max_iter is None else max_iter
    matrix = chain.matrix if isinstance(chain, JointChain) else np.asarray(chain, dtype=float)
    size = matrix.shape[0]
    if matrix.ndim != 2 or matrix.shape[1] != size or size == 0:
        raise DimensionError("转移矩阵必须是非空方阵", shape=matrix.shape)

    pi = np.full(size, 1.0 / size)
    residual = best = math.inf
    stalled = 0
    for iteration in range(1, max_iter + 1):
        nxt = pi @ matrix
        if iteration % check_every == 0 or iteration == max_iter:
            residual = float(np.max(np.abs(nxt - pi)))
            if residual <= tol:
                pi = nxt / nxt.sum()
                logger.debug("幂迭代在第 %d 次收敛，残差 %.3e", iteration, residual)
                return pi
            if residual < best * (1.0 - 1e-9):
                best, stalled = residual, 0
            else:
                stalled += 1
                if stalled >= STALL_CHECKS:
                    logger.debug("幂迭代在第 %d 次停滞（残差 %.3e）", iteration, residual)
                    break
        pi = nxt

    logger.info("幂迭代未收敛（残差 %.3e），改用线性求解", residual)
    system = np.vstack([matrix.T - np.eye(size), np.ones((1, size))])
    rhs = np.concatenate([np.zeros(size), [1.0]])
    solution, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    solution = np.clip(solution, 0.0, None)
    total = solution.sum()
    if total > 0:
        solution = solution / total
        residual = float(np.max(np.abs(solution @ matrix - solution)))
        if residual <= tol:
            return solution
    raise ConvergenceError("平稳分布不收敛", residual=residual, max_iter=max_iter)


def analyze_chain(matrix: np.ndarray) -> ChainDiagnostic:
    """分析行随机矩阵的常返类与周期

    常返类是正概率图中没有出边的强连通分量；周期通过类内BFS层号计算：
    对类内每条边 u→v，周期为 level[u] + 1 - level[v] 的最大公约数，
    存在自环时直接为1。

    Args:
        matrix: 行随机矩阵

    Returns:
        ChainDiagnostic: 诊断结果
    """
    matrix = np.asarray(matrix, dtype=float)
    support = matrix > 0
    graph = csr_matrix(support.astype(np.int8))
    n_components, labels = connected_components(graph, directed=True, connection="strong")

    closed = np.ones(n_components, dtype=bool)
    rows, cols = np.nonzero(support)
    leaving = labels[rows] != labels[cols]
    closed[np.unique(labels[rows[leaving]])] = False

    recurrent: List[List[int]] = []
    periods: List[int] = []
    for component in range(n_components):
        if not closed[component]:
            continue
        members = [int(i) for i in np.flatnonzero(labels == component)]
        recurrent.append(members)
        periods.append(_period(support, members))
    recurrent_states = {i for c in recurrent for i in c}
    transient = [i for i in range(matrix.shape[0]) if i not in recurrent_states]
    # 按首个成员排序，保证输出稳定
    order = sorted(range(len(recurrent)), key=lambda k: recurrent[k][0])
    return ChainDiagnostic([recurrent[k] for k in order], [periods[k] for k in order], transient)


def _period(support: np.ndarray, members: List[int]) -> int:
    member_set = set(members)
    if any(support[i, i] for i in members):
        return 1
    level = {members[0]: 0}
    queue = deque([members[0]])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(support[u]):
            v = int(v)
            if v in member_set and v not in level:
                level[v] = level[u] + 1
                queue.append(v)
    period = 0
    for u in members:
        for v in np.flatnonzero(support[u]):
            v = int(v)
            if v in member_set:
                period = math.gcd(period, level[u] + 1 - level[v])
    return abs(period) if period else 1


def unichain_check(mdp: Mdp, policy: JointPolicy) -> Tuple[bool, ChainDiagnostic]:
    """检查策略诱导的状态链是否为非周期单链

    Returns:
        Tuple[bool, ChainDiagnostic]: 是否恰有一个非周期常返类，以及诊断信息
    """
    diagnostic = analyze_chain(state_chain(mdp, policy))
    if not diagnostic.ok:
        logger.debug("单链检查未通过: %s", diagnostic.describe(mdp.states))
    return diagnostic.ok, diagnostic


def initial_joint_distribution(
    policy: JointPolicy,
    s0_distribution: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """初始联合分布 ξ_0(s, p) = π_0(s) μ^p(p|s)

    Args:
        policy: 联合策略
        s0_distribution: 初始状态分布，缺省为均匀分布

    Returns:
        np.ndarray: 按联合状态顺序展开的分布
    """
    n = policy.n_states
    pi0 = np.full(n, 1.0 / n) if s0_distribution is None else np.asarray(s0_distribution, dtype=float)
    if pi0.shape != (n,):
        raise DimensionError("初始状态分布长度错误", expected=n, actual=pi0.shape)
    _check_distribution(pi0, "初始状态分布")
    return (pi0[:, None] * policy.power).reshape(-1)


def _check_distribution(values: np.ndarray, name: str, **where: Any) -> None:
    if np.any(~np.isfinite(values)) or np.any(values < 0) or np.any(values > 1):
        raise ValidationError(f"{name}的取值必须位于 [0, 1]", **where)
    if abs(values.sum() - 1.0) > PROB_TOL:
        raise ValidationError(f"{name}之和必须为1", total=float(values.sum()), **where)
