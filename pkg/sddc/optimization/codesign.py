"""
控制与发射功率协同设计模块。

把约束合作博弈转化为求解器可处理的规划问题：
- 线性规划路径：决策变量 X_1(s,a)、X_2(s,p)，安全约束为期望意义下的条件
- 二次约束路径：决策变量 X(s,a,p)，每个状态一条二次安全约束（几乎必然意义下的条件）

并从占用测度中提取最优平稳策略，事后重新验证安全条件。

变量顺序：
- 线性规划：先按状态-动作对展开的 X_1，再按 (s, p) 展开的 X_2
- 二次约束规划：X(s, a, p) 按状态、动作、功率等级的顺序展开
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from sddc.analysis.lyapunov import MlfCertificate, safety_threshold
from sddc.analysis.safety import SafetyReport, check_ase, check_asas
from sddc.config import SolverConfig
from sddc.exceptions import DimensionError, InfeasibleParameterError, ValidationError
from sddc.model.channel import PowerChannel
from sddc.model.mdp import (
    JointPolicy,
    Mdp,
    PowerConditioning,
    joint_chain,
    state_chain,
    stationary_distribution,
    unichain_check,
)
from sddc.optimization.programs import (
    LinearProgram,
    ProductGroup,
    QclProgram,
    QuadraticConstraint,
    SolverResult,
    SolveStatus,
)
from sddc.optimization.qclp import solve_qclp
from sddc.optimization.simplex import solve_lp

logger = logging.getLogger(__name__)

# 提取策略时视为“未访问”的状态权重
VISIT_TOL = 1e-12


@dataclass
class OccupationMeasure:
    """占用测度

    属性说明：
        mdp (Mdp): 对应的MDP
        channel (PowerChannel): 对应的信道
        form (str): "split"（X_1、X_2）或 "joint"（X(s,a,p)）
        x1 (Optional[np.ndarray]): X_1(s,a)，形状 (状态-动作对数,)
        x2 (Optional[np.ndarray]): X_2(s,p)，形状 (N, M)
        x (Optional[np.ndarray]): X(s,a,p)，形状 (状态-动作对数, M)
    """
    mdp: Mdp
    channel: PowerChannel
    form: str
    x1: Optional[np.ndarray] = None
    x2: Optional[np.ndarray] = None
    x: Optional[np.ndarray] = None

    @classmethod
    def split(cls, mdp: Mdp, channel: PowerChannel, x1: np.ndarray, x2: np.ndarray) -> "OccupationMeasure":
        return cls(mdp, channel, "split", x1=np.asarray(x1, dtype=float),
                   x2=np.asarray(x2, dtype=float).reshape(mdp.n_states, channel.n_levels))

    @classmethod
    def joint(cls, mdp: Mdp, channel: PowerChannel, x: np.ndarray) -> "OccupationMeasure":
        return cls(mdp, channel, "joint", x=np.asarray(x, dtype=float).reshape(mdp.n_pairs, channel.n_levels))

    def pair_marginal(self) -> np.ndarray:
        """X(s, a)"""
        return self.x1 if self.form == "split" else self.x.sum(axis=1)

    def state_marginal(self) -> np.ndarray:
        """X(s)"""
        totals = np.zeros(self.mdp.n_states)
        np.add.at(totals, self.mdp.pair_state, self.pair_marginal())
        return totals

    def power_marginal(self) -> np.ndarray:
        """X(s, p)"""
        if self.form == "split":
            return self.x2
        totals = np.zeros((self.mdp.n_states, self.channel.n_levels))
        np.add.at(totals, self.mdp.pair_state, self.x)
        return totals

    def to_dict(self) -> Dict[str, Any]:
        pairs = self.pair_marginal()
        power = self.power_marginal()
        return {
            "form": self.form,
            "state_action": {
                s: {a: float(pairs[self.mdp.pair_index(i, j)]) for j, a in enumerate(self.mdp.actions[i])}
                for i, s in enumerate(self.mdp.states)
            },
            "state_power": {
                s: {p: float(power[i, j]) for j, p in enumerate(self.channel.levels)}
                for i, s in enumerate(self.mdp.states)
            },
        }


@dataclass
class CodesignResult:
    """协同设计结果

    属性说明：
        method (str): "lp"、"qp" 或 "separation"
        status (SolveStatus): 求解状态
        policy (Optional[JointPolicy]): 最优平稳策略，不可行时为 None
        optimal_cost (Optional[float]): 最优平均代价
        occupation (Optional[OccupationMeasure]): 占用测度
        safety (Optional[SafetyReport]): 事后重新验证的安全报告
        threshold (float): 施加的安全阈值
        eta (Optional[float]): 收敛率
        lambda_weight (float): 功率代价权重 λ
        solver (Optional[SolverResult]): 求解器诊断
        diagnostics (Dict[str, Any]): 其他诊断（另一种条件变量下的复核等）
    """
    method: str
    status: SolveStatus
    policy: Optional[JointPolicy]
    optimal_cost: Optional[float]
    occupation: Optional[OccupationMeasure]
    safety: Optional[SafetyReport]
    threshold: float
    eta: Optional[float]
    lambda_weight: float
    solver: Optional[SolverResult] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    def to_dict(self, mdp: Mdp, channel: PowerChannel) -> Dict[str, Any]:
        """转换为包含策略表、代价、裕量和求解器统计的字典"""
        return {
            "method": self.method,
            "status": self.status.value,
            "feasible": self.feasible,
            "optimal_cost": self.optimal_cost,
            "threshold": self.threshold,
            "eta": self.eta,
            "lambda": self.lambda_weight,
            "policy": self.policy.to_mapping(mdp, channel) if self.policy is not None else None,
            "occupation": self.occupation.to_dict() if self.occupation is not None else None,
            "safety": self.safety.to_dict() if self.safety is not None else None,
            "solver": self.solver.to_dict() if self.solver is not None else None,
            "diagnostics": self.diagnostics,
        }


def require_unichain(mdp: Mdp, channel: PowerChannel) -> None:
    """用均匀随机策略检查单链假设

    Raises:
        ValidationError: 均匀策略诱导的链不是非周期单链时抛出
    """
    ok, diagnostic = unichain_check(mdp, JointPolicy.uniform(mdp, channel))
    if not ok:
        raise ValidationError("MDP 在均匀策略下不是非周期单链", **diagnostic.describe(mdp.states))


def _certified_threshold(cert: MlfCertificate, eta: Optional[float], slack: float) -> float:
    threshold = safety_threshold(cert, eta)
    if threshold - slack <= 0:
        raise InfeasibleParameterError("no safe policy can be certified: 安全阈值不为正", threshold=threshold)
    return threshold


def _flow_rows(mdp: Mdp, width: int) -> np.ndarray:
    """流量守恒：Σ_a X(s',a) - Σ_{s,a} p(s'|s,a) X(s,a) = 0，每个 s' 一行"""
    rows = np.zeros((mdp.n_states, width))
    rows[mdp.pair_state, np.arange(mdp.n_pairs)] = 1.0
    rows[:, :mdp.n_pairs] -= mdp.transition.T
    return rows


def build_lp(
    mdp: Mdp,
    channel: PowerChannel,
    cert: MlfCertificate,
    lambda_weight: float,
    eta: Optional[float] = None,
    couple_marginals: bool = True,
    slack: float = 1e-9,
    check_unichain: bool = True,
) -> LinearProgram:
    """构造期望意义安全约束下的线性规划

    目标：Σ X_1 c_M + λ Σ X_2 c_p
    约束：流量守恒、Σ X_1 = 1、Σ X_2 = 1、Σ θ X_2 <= 阈值 - slack；
    couple_marginals 为真时再加 Σ_p X_2(s,p) = Σ_a X_1(s,a)。

    Args:
        mdp: MDP
        channel: 信道
        cert: 证书
        lambda_weight: 功率代价权重 λ > 0
        eta: 可选收敛率
        couple_marginals: 是否加入边缘分布耦合约束
        slack: 严格不等式的收紧量
        check_unichain: 是否检查单链假设

    Returns:
        LinearProgram: 线性规划

    Raises:
        InfeasibleParameterError: 阈值不为正或 λ <= 0 时抛出
    """
    if lambda_weight <= 0:
        raise InfeasibleParameterError("功率代价权重 λ 必须为正", lambda_weight=lambda_weight)
    _check_channel(mdp, channel)
    if check_unichain:
        require_unichain(mdp, channel)
    threshold = _certified_threshold(cert, eta, slack)
    n_pairs, n, m = mdp.n_pairs, mdp.n_states, channel.n_levels
    width = n_pairs + n * m

    c = np.concatenate([mdp.stage_cost, lambda_weight * channel.power_cost.reshape(-1)])
    flow = _flow_rows(mdp, width)
    norm1 = np.zeros((1, width))
    norm1[0, :n_pairs] = 1.0
    norm2 = np.zeros((1, width))
    norm2[0, n_pairs:] = 1.0
    blocks = [flow, norm1, norm2]
    names = [f"flow[{s}]" for s in mdp.states] + ["normalize[X1]", "normalize[X2]"]
    if couple_marginals:
        couple = np.zeros((n, width))
        couple[mdp.pair_state, np.arange(n_pairs)] = -1.0
        for i in range(n):
            couple[i, n_pairs + i * m:n_pairs + (i + 1) * m] = 1.0
        blocks.append(couple)
        names += [f"couple[{s}]" for s in mdp.states]
    A_eq = np.vstack(blocks)
    b_eq = np.zeros(A_eq.shape[0])
    b_eq[n] = b_eq[n + 1] = 1.0

    A_ub = np.zeros((1, width))
    A_ub[0, n_pairs:] = channel.theta_vector()
    b_ub = np.array([threshold - slack])

    variables = [f"X1[{s},{a}]" for s, a in _pair_labels(mdp)]
    variables += [f"X2[{s},{p}]" for s in mdp.states for p in channel.levels]
    logger.debug("线性规划: %d 个变量，%d 个等式，阈值 %.6g", width, A_eq.shape[0], threshold)
    return LinearProgram(c, A_eq, b_eq, A_ub, b_ub, tuple(variables), tuple(names) + ("safety[ASE]",))


def extract_policies_lp(occ: OccupationMeasure, fallback: Optional[JointPolicy] = None) -> JointPolicy:
    """μ^m(a|s) = X_1(s,a)/Σ_a X_1(s,a)，μ^p(p|s) = X_2(s,p)/Σ_p X_2(s,p)

    分母为零（未访问）的状态取 fallback 中的分布，缺省为均匀分布。
    """
    return _extract(occ, occ.pair_marginal(), occ.power_marginal(), fallback)


def extract_policies_qp(occ: OccupationMeasure, fallback: Optional[JointPolicy] = None) -> JointPolicy:
    """μ^m(a|s) = Σ_p X(s,a,p)/X(s)，μ^p(p|s) = Σ_a X(s,a,p)/X(s)；未访问状态同 extract_policies_lp"""
    return _extract(occ, occ.pair_marginal(), occ.power_marginal(), fallback)


def _extract(
    occ: OccupationMeasure,
    pairs: np.ndarray,
    power: np.ndarray,
    fallback: Optional[JointPolicy],
) -> JointPolicy:
    mdp, channel = occ.mdp, occ.channel
    default = fallback or JointPolicy.uniform(mdp, channel)
    default_rows = default.control_rows()
    pairs = np.clip(pairs, 0.0, None)
    power = np.clip(power, 0.0, None)
    control_rows, power_rows = [], []
    for i in range(mdp.n_states):
        block = pairs[mdp.action_slice(i)]
        total = block.sum()
        control_rows.append(block / total if total > VISIT_TOL else default_rows[i])
        row = power[i]
        total = row.sum()
        power_rows.append(row / total if total > VISIT_TOL else default.power[i])
    return JointPolicy.from_rows([_renormalize(r) for r in control_rows], [_renormalize(r) for r in power_rows])


def _renormalize(row: np.ndarray) -> np.ndarray:
    row = np.asarray(row, dtype=float)
    return row / row.sum()


def build_q_matrix(mdp: Mdp, channel: PowerChannel, eta_bar: float) -> List[np.ndarray]:
    """每个状态的二次约束矩阵 Q_s

    xᵀQ_sx = η̄X(s)² - Σ_{s'} [Σ_{p'} θ(s',p') X(s,p')] · [Σ_a p(s'|s,a) X(s,a)]，
    其中 X(s)、X(s,p')、X(s,a) 均展开为 x 的分量之和；Q_s 经 (B + Bᵀ)/2 对称化。

    Args:
        mdp: MDP
        channel: 信道
        eta_bar: 安全阈值 η̄ > 0

    Returns:
        List[np.ndarray]: N 个 (n, n) 对称矩阵，n = 状态-动作对数 × M
    """
    if eta_bar <= 0:
        raise InfeasibleParameterError("η̄ 必须为正", eta_bar=eta_bar)
    _check_channel(mdp, channel)
    m = channel.n_levels
    width = mdp.n_pairs * m
    theta = channel.dropout
    matrices = []
    for i in range(mdp.n_states):
        block = mdp.action_slice(i)
        n_actions = block.stop - block.start
        # t[s'] 在 (s,a,p') 处取 θ(s',p')；u[s'] 在 (s,a,p) 处取 p(s'|s,a)
        t = np.broadcast_to(theta[:, None, :], (mdp.n_states, n_actions, m)).reshape(mdp.n_states, -1)
        u = np.broadcast_to(mdp.transition[block].T[:, :, None], (mdp.n_states, n_actions, m)).reshape(
            mdp.n_states, -1)
        cross = t.T @ u
        local = eta_bar * np.ones((n_actions * m, n_actions * m)) - 0.5 * (cross + cross.T)
        Q = np.zeros((width, width))
        span = slice(block.start * m, block.stop * m)
        Q[span, span] = local
        matrices.append(Q)
    return matrices


def build_qp(
    mdp: Mdp,
    channel: PowerChannel,
    cert: MlfCertificate,
    lambda_weight: float,
    eta: Optional[float],
    slack: float = 1e-9,
    check_unichain: bool = True,
) -> QclProgram:
    """构造几乎必然意义安全约束下的二次约束线性规划

    目标：Σ X(s,a,p)[c_M(s,a) + λ c_p(s,p)]
    约束：流量守恒、Σ X = 1、每个状态 xᵀQ_sx >= 0（η̄ = 阈值 - slack）。
    每个状态的变量块声明为乘积结构 (|A(s)|, M)。

    Raises:
        InfeasibleParameterError: η 不可行或 λ <= 0 时抛出
    """
    if lambda_weight <= 0:
        raise InfeasibleParameterError("功率代价权重 λ 必须为正", lambda_weight=lambda_weight)
    _check_channel(mdp, channel)
    if check_unichain:
        require_unichain(mdp, channel)
    threshold = _certified_threshold(cert, eta, slack)
    m = channel.n_levels
    width = mdp.n_pairs * m

    c = (mdp.stage_cost[:, None] + lambda_weight * channel.power_cost[mdp.pair_state]).reshape(-1)
    pair_rows = _flow_rows(mdp, mdp.n_pairs)
    flow = np.repeat(pair_rows, m, axis=1)
    A_eq = np.vstack([flow, np.ones((1, width))])
    b_eq = np.zeros(A_eq.shape[0])
    b_eq[-1] = 1.0

    quadratic = tuple(
        QuadraticConstraint(Q, name=f"safety[{s}]")
        for s, Q in zip(mdp.states, build_q_matrix(mdp, channel, threshold - slack))
    )
    groups = tuple(
        ProductGroup(np.arange(mdp.action_slice(i).start * m, mdp.action_slice(i).stop * m).reshape(-1, m), name=s)
        for i, s in enumerate(mdp.states)
    )
    variables = tuple(f"X[{s},{a},{p}]" for s, a in _pair_labels(mdp) for p in channel.levels)
    rows = tuple(f"flow[{s}]" for s in mdp.states) + ("normalize",)
    linear = LinearProgram(c, A_eq, b_eq, None, None, variables, rows)
    return QclProgram(linear, quadratic, groups)


def joint_occupation(mdp: Mdp, policy: JointPolicy) -> np.ndarray:
    """平稳策略的占用测度 X(s,a,p) = π(s) μ^m(a|s) μ^p(p|s)，按二次约束规划的变量顺序展开

    π 为控制策略诱导的状态链的平稳分布；功率按当前状态选择，与二次约束规划的约定一致。
    """
    pi = stationary_distribution(state_chain(mdp, policy))
    return (pi[mdp.pair_state, None] * policy.control[:, None] * policy.power[mdp.pair_state]).reshape(-1)


def solve_codesign(
    mdp: Mdp,
    channel: PowerChannel,
    cert: MlfCertificate,
    lambda_weight: float = 1.0,
    eta: Optional[float] = None,
    method: str = "lp",
    config: Optional[SolverConfig] = None,
    couple_marginals: bool = True,
    threads: int = 1,
    seeds: Sequence[JointPolicy] = (),
) -> CodesignResult:
    """构造、求解、提取策略并事后验证

    线性规划路径按默认条件变量（目标状态）在诱导平稳分布上复核期望意义条件；
    二次约束路径的约束按当前状态选功率的约定编码，因此按该约定复核几乎必然意义条件，
    并在诊断中附带目标状态约定下的复核结果。二次约束路径的穷举回退以线性规划路径的
    最优策略和 seeds 中的策略为种子，结果不劣于其中任何一个满足约束的策略。

    Args:
        mdp: MDP
        channel: 信道
        cert: 证书
        lambda_weight: 功率代价权重 λ
        eta: 可选收敛率
        method: "lp" 或 "qp"
        config: 求解器配置
        couple_marginals: 线性规划是否加入边缘分布耦合约束
        threads: 穷举回退使用的线程数
        seeds: 二次约束路径的种子策略，例如分离设计的最优策略

    Returns:
        CodesignResult: 结果；不可行时 status 为 INFEASIBLE、policy 为 None
    """
    config = config or SolverConfig()
    if method == "lp":
        lp = build_lp(mdp, channel, cert, lambda_weight, eta, couple_marginals, config.strict_slack)
        threshold = float(lp.b_ub[0] + config.strict_slack)
        solved = solve_lp(lp, tol=config.tol, max_iter=config.max_iter)
        if not solved.ok:
            return _unsolved("lp", solved, threshold, eta, lambda_weight)
        n_pairs = mdp.n_pairs
        occupation = OccupationMeasure.split(mdp, channel, solved.x[:n_pairs], solved.x[n_pairs:])
        policy = extract_policies_lp(occupation)
        pi_bar = stationary_distribution(joint_chain(mdp, channel, policy))
        report = check_ase(channel.theta_vector(), pi_bar, cert, eta)
        diagnostics = {"couple_marginals": couple_marginals, "strict_slack": config.strict_slack}
    elif method == "qp":
        qp = build_qp(mdp, channel, cert, lambda_weight, eta, config.strict_slack)
        threshold = safety_threshold(cert, eta)
        candidates = list(seeds)
        relaxed = solve_codesign(mdp, channel, cert, lambda_weight, eta, "lp", config, couple_marginals)
        if relaxed.feasible:
            candidates.insert(0, relaxed.policy)
        solved = solve_qclp(qp, tol=config.tol, config=config, threads=threads,
                            seeds=[joint_occupation(mdp, p) for p in candidates])
        if not solved.ok:
            return _unsolved("qp", solved, threshold, eta, lambda_weight)
        occupation = OccupationMeasure.joint(mdp, channel, solved.x)
        fallback = _policy_from_factors(solved.factors) if solved.factors else None
        policy = extract_policies_qp(occupation, fallback)
        report = check_asas(mdp, channel, policy, cert, eta, PowerConditioning.SOURCE)
        destination = check_asas(mdp, channel, policy, cert, eta, PowerConditioning.DESTINATION)
        if destination.satisfied != report.satisfied:
            logger.warning("目标状态约定下的复核结果与约束所用约定不一致（裕量 %.3e）", destination.margin)
        diagnostics = {
            "strict_slack": config.strict_slack,
            "seed_policies": len(candidates),
            "destination_recheck": destination.to_dict(),
        }
    else:
        raise ValidationError("未知的求解方法", method=method, allowed=["lp", "qp"])

    if not report.satisfied and report.margin < -10 * config.strict_slack:
        logger.warning("%s 解的事后安全复核未通过，裕量 %.3e", method, report.margin)
    diagnostics["verified"] = bool(report.satisfied or report.margin >= -10 * config.strict_slack)
    logger.info("%s 协同设计最优代价 %.6g", method, solved.objective)
    return CodesignResult(method, solved.status, policy, float(solved.objective), occupation, report,
                          threshold, eta, lambda_weight, solved, diagnostics)


def _policy_from_factors(factors: List[List[np.ndarray]]) -> JointPolicy:
    return JointPolicy.from_rows([f[0] for f in factors], [f[1] for f in factors])


def _unsolved(method: str, solved: SolverResult, threshold: float, eta: Optional[float],
              lambda_weight: float) -> CodesignResult:
    logger.info("%s 协同设计无解: %s", method, solved.status.value)
    return CodesignResult(method, solved.status, None, None, None, None, threshold, eta, lambda_weight, solved)


def _check_channel(mdp: Mdp, channel: PowerChannel) -> None:
    if channel.states != mdp.states:
        raise DimensionError("信道状态与MDP状态不一致", mdp=list(mdp.states), channel=list(channel.states))


def _pair_labels(mdp: Mdp) -> List[tuple]:
    return [(s, a) for s, row in zip(mdp.states, mdp.actions) for a in row]
