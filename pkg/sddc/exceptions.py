"""
异常类定义模块，提供了建模、验证、求解和场景加载过程中可能出现的各类异常。
所有异常都携带结构化属性，并可通过 to_dict() 转换为命令行使用的机器可读错误对象。
"""
from typing import Any, Dict, Optional


class SddcError(Exception):
    """基础异常类

    所有与状态相关丢包信道（SDDC）协同设计相关的异常的基类。

    Attributes:
        message (str): 错误信息
        details (Dict[str, Any]): 附加的结构化信息

    Example:
        ```python
        try:
            chain = joint_chain(mdp, channel, policy)
        except SddcError as e:
            print(e.to_dict())
        ```
    """

    code = "sddc_error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        """转换为可序列化的错误字典"""
        payload: Dict[str, Any] = {"error": self.code, "message": self.message}
        payload.update({k: _plain(v) for k, v in self.details.items()})
        return payload


class ValidationError(SddcError):
    """数据验证异常

    当模型数据违反不变量（概率和不为1、丢包概率不单调等）时抛出。
    """

    code = "validation_error"


class DimensionError(ValidationError):
    """维度不匹配异常

    策略、信道与MDP的维度不一致时抛出，错误信息中会指出出错的状态或动作。
    """

    code = "dimension_error"


class UnknownLabelError(ValidationError):
    """未知标签异常

    查询不存在的状态、动作或功率等级时抛出。
    """

    code = "unknown_label"


class ConvergenceError(SddcError):
    """迭代不收敛异常

    Attributes:
        residual (float): 最后一次迭代的残差
    """

    code = "convergence_error"

    def __init__(self, message: str, residual: float, **details: Any):
        super().__init__(message, residual=residual, **details)
        self.residual = residual


class CertificateError(SddcError):
    """Lyapunov证书异常

    正定性检查失败或条件V4不成立时抛出。
    """

    code = "certificate_error"


class InfeasibleParameterError(SddcError):
    """参数不可行异常

    收敛率η不在允许区间内，或安全阈值不为正时抛出。
    """

    code = "infeasible_parameter"


class SolverError(SddcError):
    """求解器数值异常"""

    code = "solver_error"


class SchemaError(SddcError):
    """场景文件结构异常

    Attributes:
        path (str): 出错字段的JSON路径，例如 ``$.channel.dropout_table.s1``
    """

    code = "schema_error"

    def __init__(self, message: str, path: str = "$", **details: Any):
        super().__init__(message, path=path, **details)
        self.path = path

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


def _plain(value: Any) -> Any:
    # numpy 标量与元组转为 JSON 可用的类型
    if hasattr(value, "item") and callable(value.item):
        try:
            return value.item()
        except (TypeError, ValueError):
            return str(value)
    if isinstance(value, (tuple, list)):
        return [_plain(v) for v in value]
    if isinstance(value, (dict, str, int, float, bool)) or value is None:
        return value
    return str(value)


def error_payload(exc: BaseException, path: Optional[str] = None) -> Dict[str, Any]:
    """将任意异常转换为错误字典

    Args:
        exc: 异常对象
        path: 可选的字段路径

    Returns:
        Dict[str, Any]: 包含 error 与 message 字段的字典
    """
    if isinstance(exc, SddcError):
        payload = exc.to_dict()
    else:
        payload = {"error": type(exc).__name__, "message": str(exc)}
    if path is not None:
        payload.setdefault("path", path)
    return payload
