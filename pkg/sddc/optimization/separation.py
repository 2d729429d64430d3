"""
分离设计基线模块。

两阶段解耦求解：
1. 控制：只含流量守恒与归一化的线性规划，最小化 Σ X_1 c_M（不考虑信道）
2. 功率：固定第一阶段的控制策略与其平稳分布 π(s)，在 y(s,p) = μ^p(p|s) 上
   求解线性规划，最小化 λ Σ π(s) c_p(s,p) y(s,p)，约束为期望意义（ASE）
   或逐状态几乎必然意义（ASAS）的安全条件

功率阶段无可行解时返回不可行结果，对应“N/A”。
"""
import logging
from typing import Optional

import numpy as np

from sddc.analysis.lyapunov import MlfCertificate, safety_threshold
from sddc.analysis.safety import check_ase, check_asas
from sddc.config import SolverConfig
from sddc.exceptions import InfeasibleParameterError, ValidationError
from sddc.model.channel import PowerChannel
from sddc.model.mdp import (
    JointPolicy,
    Mdp,
    PowerConditioning,
    joint_chain,
    state_chain,
    stationary_distribution,
)
from sddc.optimization.codesign import (
    CodesignResult,
    OccupationMeasure,
    extract_policies_lp,
    require_unichain,
)
from sddc.optimization.programs import LinearProgram, SolveStatus
from sddc.optimization.simplex import solve_lp

logger = logging.getLogger(__name__)

SAFETY_KINDS = ("ase", "asas")
# 协同设计代价允许高出分离设计的数值误差
DOMINANCE_TOL = 1e-7


def control_stage(mdp: Mdp, tol: float = 1e-9, max_iter: int = 10_000):
    """第一阶段：不考虑信道的平均代价最优控制

    Returns:
        Tuple[SolverResult, LinearProgram]: 求解结果与线性规划
    """
    n, n_pairs = mdp.n_states, mdp.n_pairs
    flow = np.zeros((n, n_pairs))
    flow[mdp.pair_state, np.arange(n_pairs)] = 1.0
    flow -= mdp.transition.T
    A_eq = np.vstack([flow, np.ones((1, n_pairs))])
    b_eq = np.zeros(n + 1)
    b_eq[-1] = 1.0
    lp = LinearProgram(mdp.stage_cost, A_eq, b_eq, None, None)
    return solve_lp(lp, tol=tol, max_iter=max_iter), lp


def power_stage_program(
    mdp: Mdp,
    channel: PowerChannel,
    control: JointPolicy,
    pi: np.ndarray,
    threshold: float,
    lambda_weight: float,
    safety: str = "ase",
    conditioning: PowerConditioning = PowerConditioning.DESTINATION,
) -> LinearProgram:
    """第二阶段：固定控制策略后功率策略 y(s,p) 上的线性规划

    Args:
        mdp: MDP
        channel: 信道
        control: 第一阶段得到的控制策略（功率部分不使用）
        pi: 控制策略诱导的平稳分布 π(s)
        threshold: 收紧后的安全阈值
        lambda_weight: 功率代价权重 λ
        safety: "ase" 或 "asas"
        conditioning: 功率策略的条件变量

    Returns:
        LinearProgram: 变量按 (s, p) 展开
    """
    if safety not in SAFETY_KINDS:
        raise ValidationError("未知的安全条件类型", safety=safety, allowed=list(SAFETY_KINDS))
    n, m = mdp.n_states, channel.n_levels
    P = state_chain(mdp, control)
    theta = channel.dropout
    c = lambda_weight * (pi[:, None] * channel.power_cost).reshape(-1)
    A_eq = np.kron(np.eye(n), np.ones((1, m)))
    b_eq = np.ones(n)
    destination = PowerConditioning(conditioning) is PowerConditioning.DESTINATION
    if safety == "ase":
        if destination:
            row = (pi[:, None] * theta).reshape(-1)
        else:
            row = (pi[:, None] * (P @ theta)).reshape(-1)
        A_ub = row[None, :]
        b_ub = np.array([threshold])
    else:
        if destination:
            A_ub = (P[:, :, None] * theta[None, :, :]).reshape(n, n * m)
        else:
            A_ub = np.zeros((n, n * m))
            ahead = P @ theta
            for i in range(n):
                A_ub[i, i * m:(i + 1) * m] = ahead[i]
        b_ub = np.full(n, threshold)
    names = tuple(f"y[{s},{p}]" for s in mdp.states for p in channel.levels)
    return LinearProgram(c, A_eq, b_eq, A_ub, b_ub, names)


def separation_baseline(
    mdp: Mdp,
    channel: PowerChannel,
    cert: MlfCertificate,
    lambda_weight: float = 1.0,
    eta: Optional[float] = None,
    safety: str = "ase",
    conditioning: PowerConditioning = PowerConditioning.DESTINATION,
    config: Optional[SolverConfig] = None,
) -> CodesignResult:
    """分离设计基线

    Args:
        mdp: MDP
        channel: 信道
        cert: 证书
        lambda_weight: 功率代价权重 λ
        eta: 可选收敛率
        safety: 功率阶段施加的安全条件，"ase" 或 "asas"
        conditioning: 功率策略的条件变量
        config: 求解器配置

    Returns:
        CodesignResult: method 为 "separation"；功率阶段无可行解时 status 为 INFEASIBLE
    """
    config = config or SolverConfig()
    if lambda_weight <= 0:
        raise InfeasibleParameterError("功率代价权重 λ 必须为正", lambda_weight=lambda_weight)
    require_unichain(mdp, channel)
    threshold = safety_threshold(cert, eta)
    diagnostics = {"safety": safety, "conditioning": PowerConditioning(conditioning).value}

    solved, _ = control_stage(mdp, config.tol, config.max_iter)
    if not solved.ok:
        logger.warning("分离设计的控制阶段无解: %s", solved.status.value)
        return CodesignResult("separation", solved.status, None, None, None, None, threshold, eta,
                              lambda_weight, solved, diagnostics)
    x1 = solved.x
    empty = OccupationMeasure.split(mdp, channel, x1, np.zeros((mdp.n_states, channel.n_levels)))
    control = extract_policies_lp(empty)
    pi = stationary_distribution(state_chain(mdp, control))
    diagnostics["control_cost"] = float(mdp.stage_cost @ x1)

    program = power_stage_program(mdp, channel, control, pi, threshold - config.strict_slack,
                                  lambda_weight, safety, conditioning)
    power = solve_lp(program, tol=config.tol, max_iter=config.max_iter)
    if not power.ok:
        logger.info("分离设计的功率阶段无可行解（η = %s）", eta)
        return CodesignResult("separation", power.status, None, None, None, None, threshold, eta,
                              lambda_weight, power, diagnostics)

    y = np.clip(power.x.reshape(mdp.n_states, channel.n_levels), 0.0, None)
    y = y / y.sum(axis=1, keepdims=True)
    policy = JointPolicy(control.control, y, control.action_counts)
    occupation = OccupationMeasure.split(mdp, channel, x1, pi[:, None] * y)
    cost = float(mdp.stage_cost @ x1 + power.objective)
    if safety == "ase":
        pi_bar = stationary_distribution(joint_chain(mdp, channel, policy, conditioning))
        report = check_ase(channel.theta_vector(), pi_bar, cert, eta)
    else:
        report = check_asas(mdp, channel, policy, cert, eta, conditioning)
    diagnostics["verified"] = bool(report.satisfied or report.margin >= -10 * config.strict_slack)
    logger.info("分离设计代价 %.6g", cost)
    return CodesignResult("separation", SolveStatus.OPTIMAL, policy, cost, occupation, report,
                          threshold, eta, lambda_weight, power, diagnostics)


def baseline_safety(method: str) -> str:
    """与协同设计方法对应的功率阶段安全条件：线性规划路径为 ase，二次约束路径为 asas"""
    return "ase" if method == "lp" else "asas"


def baseline_conditioning(method: str, conditioning: PowerConditioning) -> PowerConditioning:
    """与协同设计约束同一约定的条件变量

    二次约束路径的安全约束按当前状态选功率编码，分离设计必须用同一约定，
    两者的代价才可比。
    """
    return PowerConditioning.SOURCE if method == "qp" else PowerConditioning(conditioning)


def dominance_gap(codesign: CodesignResult, separation: CodesignResult) -> Optional[float]:
    """分离设计代价减去协同设计代价；任一方不可行时为 None

    协同设计的可行集包含分离设计的解，差值应不小于 -DOMINANCE_TOL。
    """
    if not (codesign.feasible and separation.feasible):
        return None
    gap = separation.optimal_cost - codesign.optimal_cost
    if gap < -DOMINANCE_TOL:
        logger.error("协同设计代价 %.10g 高于分离设计 %.10g（η = %s）",
                     codesign.optimal_cost, separation.optimal_cost, codesign.eta)
    return gap
