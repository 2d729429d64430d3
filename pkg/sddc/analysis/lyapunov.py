"""
多Lyapunov函数（MLF）证书模块。

对线性切换系统，证书由两个正定矩阵 P_0、P_1 给出，V_i(x) = xᵀP_ix。
模块负责：
- 计算每个模式的衰减率 λ_i（广义特征值 F_iᵀP_iF_i ⪯ λ_iP_i 的最紧常数）
- 计算模式间比较常数 ϱ
- 检查条件 ϱ·min(λ_0, λ_1) < 1
- 给出安全阈值、K 类函数系数以及与参考值的比对
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy import linalg

from sddc.exceptions import CertificateError, DimensionError, InfeasibleParameterError
from sddc.model.plant import SwitchedPlant

logger = logging.getLogger(__name__)

# 直流电机算例中给出的Lyapunov矩阵与衰减率
REFERENCE_P = ((6.5982, 0.1143), (0.1143, 0.0582))
REFERENCE_LAMBDA0 = 1.03
REFERENCE_LAMBDA1 = 0.1
REFERENCE_RHO = 1.0

# 扰动增益 χ 中保持衰减率所允许的余量
DEFAULT_MARGIN = 1e-6


@dataclass(frozen=True)
class MlfCertificate:
    """多Lyapunov函数证书

    模式1（包送达）是稳定模式，通常 λ_1 < 1 <= λ_0。

    属性说明：
        P0 (np.ndarray): 丢包模式的Lyapunov矩阵
        P1 (np.ndarray): 送达模式的Lyapunov矩阵
        lambda0 (float): 丢包模式衰减率 λ_0
        lambda1 (float): 送达模式衰减率 λ_1
        rho (float): 比较常数 ϱ >= 1
        alpha1_coeff (float): α_1(r) = alpha1_coeff · r²
        alpha2_coeff (float): α_2(r) = alpha2_coeff · r²
        chi_coeff (float): χ(r) = chi_coeff · r²
        source (str): "recomputed"、"reference" 或 "explicit"

    Raises:
        CertificateError: 矩阵非正定或条件 ϱ·min(λ_0, λ_1) < 1 不成立时抛出
    """
    P0: np.ndarray
    P1: np.ndarray
    lambda0: float
    lambda1: float
    rho: float
    alpha1_coeff: float
    alpha2_coeff: float
    chi_coeff: float
    source: str = "recomputed"
    notes: List[str] = field(default_factory=list, compare=False)

    def __post_init__(self):
        P0 = _positive_definite(self.P0, "P0")
        P1 = _positive_definite(self.P1, "P1")
        if P0.shape != P1.shape:
            raise DimensionError("P0 与 P1 维度不一致", P0=P0.shape, P1=P1.shape)
        object.__setattr__(self, "P0", P0)
        object.__setattr__(self, "P1", P1)
        for name in ("lambda0", "lambda1", "rho", "alpha1_coeff", "alpha2_coeff", "chi_coeff"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise CertificateError(f"{name} 必须是非负有限数", value=value)
            object.__setattr__(self, name, value)
        if self.rho < 1.0:
            raise CertificateError("比较常数 ϱ 不能小于1", rho=self.rho)
        if self.alpha1_coeff <= 0 or self.alpha2_coeff <= 0:
            raise CertificateError("α_1、α_2 的系数必须为正")
        product = self.rho * min(self.lambda0, self.lambda1)
        if product >= 1.0:
            raise CertificateError("条件 ϱ·min(λ_0, λ_1) < 1 不成立", value=product)
        if self.lambda0 < self.lambda1:
            logger.warning("λ_0 = %.6g 小于 λ_1 = %.6g，送达模式不是更稳定的模式", self.lambda0, self.lambda1)

    @property
    def n(self) -> int:
        return self.P0.shape[0]

    @property
    def ordered(self) -> bool:
        """是否满足 λ_0 >= λ_1"""
        return self.lambda0 >= self.lambda1

    def alpha1(self, r: float) -> float:
        return self.alpha1_coeff * r * r

    def alpha2(self, r: float) -> float:
        return self.alpha2_coeff * r * r

    def chi(self, r: float) -> float:
        return self.chi_coeff * r * r

    def with_values(self, **changes: Any) -> "MlfCertificate":
        """返回替换部分数值后的证书"""
        values = self.to_mapping()
        values.update(changes)
        return MlfCertificate.from_mapping(values, source=changes.get("source", self.source))

    def to_mapping(self) -> Dict[str, Any]:
        """转换为证书JSON字典"""
        return {
            "P0": self.P0.tolist(),
            "P1": self.P1.tolist(),
            "lambda0": self.lambda0,
            "lambda1": self.lambda1,
            "rho": self.rho,
            "alpha1_coeff": self.alpha1_coeff,
            "alpha2_coeff": self.alpha2_coeff,
            "chi_coeff": self.chi_coeff,
        }

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], source: str = "explicit") -> "MlfCertificate":
        """由证书JSON字典构造；缺省的 α、χ 系数由 P 推出"""
        P0 = np.array(data["P0"], dtype=float)
        P1 = np.array(data["P1"], dtype=float)
        lambda0, lambda1 = float(data["lambda0"]), float(data["lambda1"])
        alpha1, alpha2 = comparison_coefficients(P0, P1)
        chi = data.get("chi_coeff")
        if chi is None:
            chi = disturbance_gain(P0, P1, max(lambda0, lambda1))
        return cls(
            P0=P0, P1=P1, lambda0=lambda0, lambda1=lambda1, rho=float(data["rho"]),
            alpha1_coeff=float(data.get("alpha1_coeff", alpha1)),
            alpha2_coeff=float(data.get("alpha2_coeff", alpha2)),
            chi_coeff=float(chi), source=source,
        )


@dataclass
class FalsificationReport:
    """采样网格证伪结果（只报告违例，从不出具证书）

    属性说明：
        checked (int): 检查的样本数
        violations (List[Dict[str, Any]]): 违例列表，包含条件名、模式、样本下标与超出量
    """
    checked: int
    violations: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def falsified(self) -> bool:
        return bool(self.violations)


def verify_mlf(plant: SwitchedPlant, P0: np.ndarray, P1: np.ndarray, margin: float = DEFAULT_MARGIN) -> MlfCertificate:
    """验证线性切换系统的多Lyapunov函数证书

    λ_i 取广义特征值问题 (F_iᵀP_iF_i, P_i) 的最大特征值；
    ϱ 取 (P_0, P_1) 与 (P_1, P_0) 的最大广义特征值中较大者，P_0 = P_1 时恰为1。

    Args:
        plant: 线性切换系统（非线性系统请使用 falsify_mlf）
        P0: 丢包模式的正定矩阵
        P1: 送达模式的正定矩阵
        margin: 构造扰动增益 χ 时保留的衰减率余量

    Returns:
        MlfCertificate: 验证通过的证书

    Raises:
        CertificateError: 矩阵非正定、系统非线性或 ϱ·min(λ_0, λ_1) >= 1 时抛出

    示例：
        ```python
        cert = verify_mlf(dc_motor_preset(), P, P)
        cert.rho  # 1.0
        ```
    """
    if not getattr(plant, "is_linear", False):
        raise CertificateError("非线性系统只能做采样证伪，请使用 falsify_mlf")
    P0 = _positive_definite(P0, "P0")
    P1 = _positive_definite(P1, "P1")
    F0, F1 = plant.mode_matrices()
    if P0.shape != F0.shape or P1.shape != F1.shape:
        raise DimensionError("Lyapunov矩阵与系统维度不一致", P0=P0.shape, P1=P1.shape, n=F0.shape[0])

    lambda0 = decay_rate(F0, P0)
    lambda1 = decay_rate(F1, P1)
    rho = comparison_constant(P0, P1)
    alpha1, alpha2 = comparison_coefficients(P0, P1)
    chi = disturbance_gain(P0, P1, max(lambda0, lambda1), margin)
    logger.info("证书: λ_0 = %.6g, λ_1 = %.6g, ϱ = %.6g", lambda0, lambda1, rho)
    return MlfCertificate(P0, P1, lambda0, lambda1, rho, alpha1, alpha2, chi, source="recomputed")


def decay_rate(F: np.ndarray, P: np.ndarray) -> float:
    """最小的 λ 使得 FᵀPF ⪯ λP"""
    values = linalg.eigh(F.T @ P @ F, P, eigvals_only=True)
    return max(float(values[-1]), 0.0)


def comparison_constant(P0: np.ndarray, P1: np.ndarray) -> float:
    """最小的 ϱ 使得 V_i <= ϱ V_j 对所有 i != j 成立"""
    if np.array_equal(P0, P1):
        return 1.0
    forward = linalg.eigh(P0, P1, eigvals_only=True)[-1]
    backward = linalg.eigh(P1, P0, eigvals_only=True)[-1]
    return max(float(forward), float(backward), 1.0)


def comparison_coefficients(P0: np.ndarray, P1: np.ndarray) -> tuple:
    """∞范数下的 α_1、α_2 系数

    由 |x|∞ <= ‖x‖₂ 与 ‖x‖₂² <= n|x|∞² 得：
    α_1(r) = min λ_min(P_i) · r²，α_2(r) = max λ_max(P_i) · n · r²
    """
    n = np.asarray(P0).shape[0]
    lows = [linalg.eigvalsh(P)[0] for P in (P0, P1)]
    highs = [linalg.eigvalsh(P)[-1] for P in (P0, P1)]
    return float(min(lows)), float(max(highs) * n)


def disturbance_gain(P0: np.ndarray, P1: np.ndarray, lambda_max: float, margin: float = DEFAULT_MARGIN) -> float:
    """线性对象的扰动增益系数 c_χ

    V(Fx + w) <= (1+ε)xᵀFᵀPFx + (1+1/ε)wᵀPw，取 ε = margin / max λ_i
    使衰减率最多增加 margin，于是 c_χ = (1 + 1/ε) · max λ_max(P_i)。
    """
    high = max(linalg.eigvalsh(np.asarray(P, dtype=float))[-1] for P in (P0, P1))
    if lambda_max <= 0:
        return float(high)
    epsilon = margin / lambda_max
    return float((1.0 + 1.0 / epsilon) * high)


def safety_threshold(cert: MlfCertificate, eta: Optional[float] = None) -> float:
    """安全条件右端的阈值

    无 η 时返回 (1 - λ_1ϱ) / (ϱ(λ_0 - λ_1))，
    给定 η 时返回 (η - λ_1ϱ) / (ϱ(λ_0 - λ_1))。

    Args:
        cert: 证书
        eta: 可选的收敛率，需满足 λ_1ϱ < η < 1

    Returns:
        float: 正的阈值

    Raises:
        InfeasibleParameterError: λ_0 <= λ_1、ϱλ_1 >= 1 或 η 不在允许区间时抛出
    """
    lam0, lam1, rho = cert.lambda0, cert.lambda1, cert.rho
    if lam0 <= lam1:
        raise InfeasibleParameterError("需要 λ_0 > λ_1", lambda0=lam0, lambda1=lam1)
    floor = lam1 * rho
    if floor >= 1.0:
        raise InfeasibleParameterError("需要 ϱλ_1 < 1", value=floor)
    if eta is None:
        return (1.0 - floor) / (rho * (lam0 - lam1))
    eta = float(eta)
    if not floor < eta < 1.0:
        raise InfeasibleParameterError(
            "convergence rate infeasible: η 必须位于 (λ_1ϱ, 1)", eta=eta, lower=floor, upper=1.0,
        )
    return (eta - floor) / (rho * (lam0 - lam1))


def reference_certificate(P: Optional[np.ndarray] = None) -> MlfCertificate:
    """直流电机算例的参考证书（λ_1 = 0.1，λ_0 = 1.03，ϱ = 1）"""
    P = np.array(REFERENCE_P if P is None else P, dtype=float)
    alpha1, alpha2 = comparison_coefficients(P, P)
    chi = disturbance_gain(P, P, REFERENCE_LAMBDA0)
    return MlfCertificate(P, P, REFERENCE_LAMBDA0, REFERENCE_LAMBDA1, REFERENCE_RHO,
                          alpha1, alpha2, chi, source="reference")


def compare_with_reference(
    cert: MlfCertificate,
    reference: MlfCertificate,
    tol: float = 0.005,
) -> Dict[str, Any]:
    """比较重新计算的证书与参考值

    Args:
        cert: 重新计算得到的证书
        reference: 参考证书
        tol: 允许的绝对偏差

    Returns:
        Dict[str, Any]: 每个参数的重算值、参考值、偏差，以及 within_tolerance 标志
    """
    report: Dict[str, Any] = {"tolerance": tol, "parameters": {}}
    within = True
    for name in ("lambda0", "lambda1", "rho"):
        ours, theirs = getattr(cert, name), getattr(reference, name)
        deviation = abs(ours - theirs)
        ok = deviation <= tol
        within = within and ok
        report["parameters"][name] = {
            "recomputed": ours, "reference": theirs, "deviation": deviation, "within_tolerance": ok,
        }
    report["within_tolerance"] = within
    if not within:
        logger.warning(
            "重算证书与参考值偏差超出 %.3g: λ_0 %.6g/%.6g, λ_1 %.6g/%.6g, ϱ %.6g/%.6g",
            tol, cert.lambda0, reference.lambda0, cert.lambda1, reference.lambda1, cert.rho, reference.rho,
        )
    return report


def falsify_mlf(
    plant: SwitchedPlant,
    P0: np.ndarray,
    P1: np.ndarray,
    lambda0: float,
    lambda1: float,
    rho: float,
    samples: Sequence[Sequence[float]],
    tol: float = 1e-9,
) -> FalsificationReport:
    """在采样网格上证伪多Lyapunov函数条件

    V_i(z) = z[:d]ᵀ P_i z[:d]，d 为 P_i 的维数（可取对象状态或增广状态）。
    逐样本检查 V_i(f_i(z, 0)) <= λ_i V_i(z) 与 V_i(z) <= ϱ V_j(z)。

    Args:
        plant: 任意切换系统
        P0, P1: 候选Lyapunov矩阵
        lambda0, lambda1, rho: 候选常数
        samples: 增广状态样本
        tol: 相对容差

    Returns:
        FalsificationReport: 违例报告
    """
    mats = (_positive_definite(P0, "P0"), _positive_definite(P1, "P1"))
    lambdas = (float(lambda0), float(lambda1))
    d = mats[0].shape[0]
    report = FalsificationReport(checked=0)

    def value(i: int, z: np.ndarray) -> float:
        head = z[:d]
        return float(head @ mats[i] @ head)

    for index, sample in enumerate(samples):
        z = np.asarray(sample, dtype=float)
        report.checked += 1
        for mode in (0, 1):
            after = value(mode, plant.step(z, mode))
            bound = lambdas[mode] * value(mode, z)
            if after > bound + tol * max(1.0, abs(bound)):
                report.violations.append(
                    {"condition": "decay", "mode": mode, "sample": index, "excess": after - bound}
                )
            other = value(1 - mode, z)
            if value(mode, z) > rho * other + tol * max(1.0, other):
                report.violations.append(
                    {"condition": "comparison", "mode": mode, "sample": index,
                     "excess": value(mode, z) - rho * other}
                )
    if report.falsified:
        logger.warning("采样证伪发现 %d 处违例", len(report.violations))
    return report


def _positive_definite(P: Any, name: str) -> np.ndarray:
    P = np.atleast_2d(np.array(P, dtype=float))
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise CertificateError(f"{name} 必须是方阵", shape=P.shape)
    if not np.all(np.isfinite(P)):
        raise CertificateError(f"{name} 含有非有限值")
    scale = max(1.0, float(np.max(np.abs(P))))
    if np.max(np.abs(P - P.T)) > 1e-9 * scale:
        raise CertificateError(f"{name} 不是对称矩阵")
    P = 0.5 * (P + P.T)
    try:
        linalg.cholesky(P)
    except linalg.LinAlgError:
        raise CertificateError(f"{name} 不是正定矩阵", min_eigenvalue=float(linalg.eigvalsh(P)[0]))
    P.setflags(write=False)
    return P
