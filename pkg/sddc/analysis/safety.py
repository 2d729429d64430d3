"""
随机安全性充分条件模块。

提供三类条件的检查：
- ASE（期望意义下渐近安全）：θᵀπ̄ < 阈值
- ASAS（几乎必然渐近安全）：对每个联合状态 (s, p)，P̄θ 的对应分量 < 阈值
- PSP（概率意义下实用安全）：与 ASAS 相同的左端，非严格不等式，并给出退出概率上界

以及期望Lyapunov函数的理论包络和联合状态向量形式的上界递推。
所有阈值都来自 sddc.analysis.lyapunov.safety_threshold。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from sddc.analysis.lyapunov import MlfCertificate, safety_threshold
from sddc.exceptions import DimensionError, InfeasibleParameterError, ValidationError
from sddc.model.channel import PowerChannel
from sddc.model.mdp import (
    JointChain,
    JointPolicy,
    Mdp,
    PowerConditioning,
    joint_chain,
    stationary_distribution,
)

logger = logging.getLogger(__name__)

ASE = "ASE"
ASAS = "ASAS"
PSP = "PSP"


@dataclass
class SafetyReport:
    """安全条件检查报告

    属性说明：
        kind (str): 条件类型 ASE、ASAS 或 PSP
        satisfied (bool): 是否满足
        lhs (np.ndarray): 左端值；ASE 为单个值，ASAS/PSP 为每个联合状态的值
        threshold (float): 阈值
        margin (float): 阈值减去最大左端值
        eta (Optional[float]): 收敛率，None 表示渐近情形
        strict (bool): 是否为严格不等式
        worst_offender (Optional[Tuple[str, str]]): 左端最大的联合状态
        worst_step (Optional[int]): 检查策略序列时最差的时刻
        exit_probability (Optional[float]): PSP 的退出概率上界 ρ_ε(Δ, M_w)
        conditioning (Optional[str]): 功率策略的条件变量
    """
    kind: str
    satisfied: bool
    lhs: np.ndarray
    threshold: float
    margin: float
    eta: Optional[float] = None
    strict: bool = True
    worst_offender: Optional[Tuple[str, str]] = None
    worst_step: Optional[int] = None
    exit_probability: Optional[float] = None
    conditioning: Optional[str] = None
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def max_lhs(self) -> float:
        return float(np.max(self.lhs))

    def to_dict(self) -> Dict[str, Any]:
        """转换为包含全部中间量的JSON字典"""
        lhs = np.atleast_1d(self.lhs)
        return {
            "kind": self.kind,
            "satisfied": bool(self.satisfied),
            "lhs": [float(v) for v in lhs] if lhs.size > 1 or self.kind != ASE else float(lhs[0]),
            "max_lhs": self.max_lhs,
            "threshold": float(self.threshold),
            "margin": float(self.margin),
            "eta": self.eta,
            "strict": self.strict,
            "worst_offender": list(self.worst_offender) if self.worst_offender else None,
            "worst_step": self.worst_step,
            "exit_probability": self.exit_probability,
            "conditioning": self.conditioning,
            **self.details,
        }


def check_ase(
    theta: Sequence[float],
    pi_bar: Sequence[float],
    cert: MlfCertificate,
    eta: Optional[float] = None,
) -> SafetyReport:
    """检查期望意义下的渐近（或指数）安全条件 θᵀπ̄ < 阈值

    Args:
        theta: 联合状态上的丢包概率
        pi_bar: 联合状态上的平稳分布
        cert: 证书
        eta: 可选收敛率

    Returns:
        SafetyReport: 检查报告

    Raises:
        DimensionError: 长度不一致时抛出
    """
    theta = np.asarray(theta, dtype=float)
    pi_bar = np.asarray(pi_bar, dtype=float)
    if theta.shape != pi_bar.shape or theta.ndim != 1:
        raise DimensionError("θ 与 π̄ 的长度必须一致", theta=theta.shape, pi_bar=pi_bar.shape)
    if np.any(pi_bar < -1e-12) or abs(pi_bar.sum() - 1.0) > 1e-9:
        raise ValidationError("π̄ 必须是概率分布", total=float(pi_bar.sum()))
    threshold = safety_threshold(cert, eta)
    lhs = float(theta @ pi_bar)
    margin = threshold - lhs
    return SafetyReport(ASE, margin > 0, np.array([lhs]), threshold, margin, eta=eta)


def asas_lhs(
    mdp: Mdp,
    channel: PowerChannel,
    policy: JointPolicy,
    conditioning: PowerConditioning = PowerConditioning.DESTINATION,
) -> Tuple[np.ndarray, JointChain]:
    """每个联合状态的 Σ_{s',p'} P̄((s,p),(s',p')) θ(s',p')"""
    chain = joint_chain(mdp, channel, policy, conditioning)
    return chain.matrix @ channel.theta_vector(), chain


def check_asas(
    mdp: Mdp,
    channel: PowerChannel,
    policy: Union[JointPolicy, Sequence[JointPolicy]],
    cert: MlfCertificate,
    eta: Optional[float] = None,
    conditioning: PowerConditioning = PowerConditioning.DESTINATION,
) -> SafetyReport:
    """检查几乎必然渐近（或指数）安全条件

    对每个联合状态 (s, p)：
    lhs(s, p) = Σ_{s',p'} θ(s',p') μ^p(p'|·) Σ_a p(s'|s,a) μ^m(a|s) < 阈值

    传入策略列表时逐时刻检查，报告最差的时刻。

    Args:
        mdp: MDP
        channel: 信道
        policy: 平稳策略，或时变策略序列
        cert: 证书
        eta: 可选收敛率
        conditioning: 功率策略的条件变量

    Returns:
        SafetyReport: 检查报告，包含最差的联合状态
    """
    threshold = safety_threshold(cert, eta)
    return _per_state_report(ASAS, mdp, channel, policy, threshold, eta, conditioning, strict=True)


def check_psp(
    mdp: Mdp,
    channel: PowerChannel,
    policy: Union[JointPolicy, Sequence[JointPolicy]],
    cert: MlfCertificate,
    eta: float,
    delta: float,
    epsilon: float,
    disturbance_bound: float,
    conditioning: PowerConditioning = PowerConditioning.DESTINATION,
) -> SafetyReport:
    """检查概率意义下的实用安全条件

    左端与 ASAS 相同，使用非严格不等式；退出概率上界
    ρ_ε(Δ, M_w) = χ(M_w) / ((1 - η) α_1(Δ + ε))。

    Args:
        mdp: MDP
        channel: 信道
        policy: 策略或策略序列
        cert: 证书
        eta: 收敛率，需位于 (λ_1ϱ, 1)
        delta: 目标集半径 Δ > 0
        epsilon: 膨胀量 ε > 0
        disturbance_bound: 扰动上界 M_w >= 0
        conditioning: 功率策略的条件变量

    Returns:
        SafetyReport: 含 exit_probability 的报告

    Raises:
        InfeasibleParameterError: η 不可行或 Δ、ε 非正时抛出
    """
    if eta is None:
        raise InfeasibleParameterError("PSP 检查需要给定收敛率 η")
    if not (delta > 0 and epsilon > 0):
        raise InfeasibleParameterError("Δ 与 ε 必须为正", delta=delta, epsilon=epsilon)
    if not math.isfinite(disturbance_bound) or disturbance_bound < 0:
        raise InfeasibleParameterError("扰动上界必须是非负有限数", Mw=disturbance_bound)
    threshold = safety_threshold(cert, eta)
    report = _per_state_report(PSP, mdp, channel, policy, threshold, eta, conditioning, strict=False)
    report.exit_probability = exit_probability(cert, eta, delta, epsilon, disturbance_bound)
    report.details.update({"delta": delta, "epsilon": epsilon, "disturbance_bound": disturbance_bound})
    return report


def exit_probability(cert: MlfCertificate, eta: float, delta: float, epsilon: float, disturbance_bound: float) -> float:
    """退出概率上界 ρ_ε(Δ, M_w) = χ(M_w) / ((1 - η) α_1(Δ + ε))"""
    return cert.chi(disturbance_bound) / ((1.0 - eta) * cert.alpha1(delta + epsilon))


def corollary_consistency(
    mdp: Mdp,
    channel: PowerChannel,
    policy: JointPolicy,
    cert: MlfCertificate,
    eta: Optional[float] = None,
    conditioning: PowerConditioning = PowerConditioning.DESTINATION,
) -> bool:
    """验证 ASAS 满足 ⇒ 在诱导平稳分布上 ASE 满足

    该蕴含关系恒成立，返回 False 意味着实现有误。
    """
    asas = check_asas(mdp, channel, policy, cert, eta, conditioning)
    if not asas.satisfied:
        return True
    chain = joint_chain(mdp, channel, policy, conditioning)
    pi_bar = stationary_distribution(chain)
    ase = check_ase(channel.theta_vector(), pi_bar, cert, eta)
    if not ase.satisfied:
        logger.error("ASAS 满足而 ASE 不满足: ASAS 裕量 %.3e, ASE 裕量 %.3e", asas.margin, ase.margin)
    return ase.satisfied


def mixed_rates(cert: MlfCertificate, theta: np.ndarray) -> np.ndarray:
    """θ̄ = λ_0 θ + (1 - θ) λ_1"""
    theta = np.asarray(theta, dtype=float)
    return cert.lambda0 * theta + (1.0 - theta) * cert.lambda1


def ase_envelope(
    cert: MlfCertificate,
    theta: Sequence[float],
    distribution: Sequence[float],
    k_max: int,
    x0_bound: float,
    chain: Optional[Union[JointChain, np.ndarray]] = None,
) -> np.ndarray:
    """期望Lyapunov函数 E[V(x_k)] 的理论上界，k = 0 … k_max

    envelope[k] = α_2(x0_bound) · Π_{ℓ=1..k} ϱ[(λ_0 - λ_1) θᵀξ_ℓ + λ_1]

    给出 chain 时 distribution 为初始联合分布 ξ_0，并按 ξ_{ℓ+1}ᵀ = ξ_ℓᵀP̄ 传播；
    否则 distribution 视为平稳分布，ξ_ℓ 恒等于它。

    Args:
        cert: 证书
        theta: 联合状态上的丢包概率
        distribution: ξ_0 或平稳分布 π̄
        k_max: 最大时刻
        x0_bound: 初始状态的∞范数上界
        chain: 可选的联合链

    Returns:
        np.ndarray: 长度 k_max + 1 的包络
    """
    if k_max < 0:
        raise ValidationError("k_max 不能为负", k_max=k_max)
    theta = np.asarray(theta, dtype=float)
    xi = np.asarray(distribution, dtype=float)
    if theta.shape != xi.shape:
        raise DimensionError("θ 与分布长度不一致", theta=theta.shape, distribution=xi.shape)
    matrix = None if chain is None else (chain.matrix if isinstance(chain, JointChain) else np.asarray(chain))
    envelope = np.empty(k_max + 1)
    envelope[0] = cert.alpha2(x0_bound)
    for k in range(1, k_max + 1):
        if matrix is not None:
            xi = xi @ matrix
        factor = cert.rho * ((cert.lambda0 - cert.lambda1) * float(theta @ xi) + cert.lambda1)
        envelope[k] = envelope[k - 1] * factor
    return envelope


def bound_propagation(
    cert: MlfCertificate,
    channel: PowerChannel,
    chain: JointChain,
    v0_bar: Sequence[float],
    k_max: int,
) -> np.ndarray:
    """联合状态向量形式的上界递推 V̄_{k+1} = ϱ · diag(θ̄) · P̄ᵀ · V̄_k

    P̄ 按行随机存储，故此处使用转置。

    Args:
        cert: 证书
        channel: 信道，提供 θ
        chain: 联合链
        v0_bar: 初始向量 V̄_0 >= 0
        k_max: 最大时刻

    Returns:
        np.ndarray: 形状 (k_max + 1, 联合状态数)，第 k 行为 V̄_k
    """
    v = np.asarray(v0_bar, dtype=float)
    if v.shape != (chain.size,):
        raise DimensionError("V̄_0 长度与联合链不一致", expected=chain.size, actual=v.shape)
    if np.any(v < 0):
        raise ValidationError("V̄_0 必须非负")
    rates = cert.rho * mixed_rates(cert, channel.theta_vector())
    operator = rates[:, None] * chain.matrix.T
    rows = np.empty((k_max + 1, v.size))
    rows[0] = v
    for k in range(1, k_max + 1):
        rows[k] = operator @ rows[k - 1]
    return rows


def _per_state_report(
    kind: str,
    mdp: Mdp,
    channel: PowerChannel,
    policy: Union[JointPolicy, Sequence[JointPolicy]],
    threshold: float,
    eta: Optional[float],
    conditioning: PowerConditioning,
    strict: bool,
) -> SafetyReport:
    conditioning = PowerConditioning(conditioning)
    sequence = [policy] if isinstance(policy, JointPolicy) else list(policy)
    if not sequence:
        raise ValidationError("策略序列不能为空")
    worst_value, worst_step, worst_lhs = -math.inf, 0, None
    for step_index, item in enumerate(sequence):
        lhs, _ = asas_lhs(mdp, channel, item, conditioning)
        if lhs.max() > worst_value:
            worst_value, worst_step, worst_lhs = float(lhs.max()), step_index, lhs
    margin = threshold - worst_value
    satisfied = margin > 0 if strict else margin >= 0
    position = int(np.argmax(worst_lhs))
    m = channel.n_levels
    offender = (mdp.states[position // m], channel.levels[position % m])
    if not satisfied:
        logger.info("%s 条件不满足，最差联合状态 %s，左端 %.6g，阈值 %.6g", kind, offender, worst_value, threshold)
    return SafetyReport(
        kind, satisfied, worst_lhs, threshold, margin, eta=eta, strict=strict,
        worst_offender=offender,
        worst_step=worst_step if len(sequence) > 1 else None,
        conditioning=conditioning.value,
    )
