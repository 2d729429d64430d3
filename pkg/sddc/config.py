"""
配置管理模块，定义了求解器、马尔可夫链计算和运行时的配置类。
提供了配置的验证、点号路径更新和环境变量覆盖机制。
"""
import os
from dataclasses import dataclass, field
from typing import Any, Dict

from sddc.exceptions import ValidationError

THREADS_ENV = "SDDC_THREADS"


@dataclass
class SolverConfig:
    """求解器配置类

    属性说明：
        tol (float): 原始可行性与对偶可行性容差
        strict_slack (float): 严格不等式 "<" 收紧为 "<= 阈值 - slack" 的松弛量
        max_iter (int): 单纯形法最大迭代次数
        grid_budget (int): 非凸回退时粗网格的组合数上限
        grid_resolution (float): 网格细化停止的步长
        incumbents (int): 细化阶段保留的候选解数量
        slsqp_max_iter (int): 凸路径 SLSQP 的最大迭代次数
        polish_iter (int): 网格穷举后局部精修的 SLSQP 迭代上限，0 表示不精修

    示例：
        ```python
        config = SolverConfig(tol=1e-10)
        config.validate()
        ```
    """
    tol: float = 1e-9
    strict_slack: float = 1e-9
    max_iter: int = 10_000
    grid_budget: int = 50_000
    grid_resolution: float = 0.0125
    incumbents: int = 4
    slsqp_max_iter: int = 500
    polish_iter: int = 200

    def validate(self) -> None:
        """验证求解器配置

        Raises:
            ValidationError: 参数非正时抛出
        """
        if self.tol <= 0 or self.strict_slack < 0:
            raise ValidationError("容差必须为正，松弛量必须非负")
        if self.max_iter <= 0 or self.grid_budget <= 0 or self.slsqp_max_iter <= 0:
            raise ValidationError("迭代次数与网格预算必须为正整数")
        if not 0 < self.grid_resolution < 1:
            raise ValidationError("网格分辨率必须在(0, 1)之间")
        if self.polish_iter < 0:
            raise ValidationError("局部精修迭代上限不能为负")
        if self.incumbents < 1:
            raise ValidationError("候选解数量至少为1")


@dataclass
class ChainConfig:
    """马尔可夫链计算配置

    属性说明：
        tol (float): 平稳分布残差容差
        max_iter (int): 幂迭代最大次数
    """
    tol: float = 1e-12
    max_iter: int = 1_000_000

    def validate(self) -> None:
        if self.tol <= 0 or self.max_iter <= 0:
            raise ValidationError("平稳分布容差与迭代次数必须为正")


@dataclass
class RuntimeConfig:
    """运行时配置

    属性说明：
        threads (int): 蒙特卡洛与参数扫描使用的工作线程数，
            可由环境变量 SDDC_THREADS 覆盖
    """
    threads: int = 1

    @classmethod
    def from_env(cls) -> "RuntimeConfig":
        """从环境变量读取运行时配置

        Raises:
            ValidationError: 环境变量不是正整数时抛出
        """
        raw = os.environ.get(THREADS_ENV)
        if raw is None or raw.strip() == "":
            return cls()
        try:
            threads = int(raw)
        except ValueError:
            raise ValidationError(f"{THREADS_ENV} 必须是正整数: {raw!r}")
        config = cls(threads=threads)
        config.validate()
        return config

    def validate(self) -> None:
        if self.threads < 1:
            raise ValidationError("线程数至少为1")


@dataclass
class SddcConfig:
    """总配置类

    聚合求解器、马尔可夫链与运行时配置，支持点号路径更新。

    示例：
        ```python
        config = SddcConfig()
        config.update({"solver.tol": 1e-10, "runtime.threads": 4})
        ```
    """
    solver: SolverConfig = field(default_factory=SolverConfig)
    chain: ChainConfig = field(default_factory=ChainConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig.from_env)

    def update(self, config_dict: Dict[str, Any]) -> None:
        """更新配置参数

        使用点号分隔的键路径更新嵌套配置，更新后重新验证。

        Args:
            config_dict: 配置字典，例如 {"solver.grid_budget": 20000}

        Raises:
            ValidationError: 键路径不存在或更新后的配置无效时抛出
        """
        for key, value in config_dict.items():
            parts = key.split('.')
            obj = self
            for part in parts[:-1]:
                if not hasattr(obj, part):
                    raise ValidationError(f"未知的配置项: {key}")
                obj = getattr(obj, part)
            if not hasattr(obj, parts[-1]):
                raise ValidationError(f"未知的配置项: {key}")
            setattr(obj, parts[-1], value)
        self.validate()

    def validate(self) -> None:
        self.solver.validate()
        self.chain.validate()
        self.runtime.validate()
