"""
统计计算工具模块，为蒙特卡洛结果提供汇总统计与置信区间。
"""
import math
from typing import Any, Dict, Tuple

import numpy as np
from scipy import stats


class StatisticsCalculator:
    """统计计算器类

    所有方法都是静态方法，可以直接调用。非有限值在计算前被剔除。
    """

    @staticmethod
    def calculate_basic_stats(values: np.ndarray) -> Dict[str, Any]:
        """计算基本统计量

        Args:
            values: 数据数组

        Returns:
            Dict[str, Any]: min、max、mean、median、std、count
        """
        values = np.asarray(values, dtype=float)
        values = values[np.isfinite(values)]
        if values.size == 0:
            return {"min": None, "max": None, "mean": None, "median": None, "std": None, "count": 0}
        return {
            "min": float(np.min(values)),
            "max": float(np.max(values)),
            "mean": float(np.mean(values)),
            "median": float(np.median(values)),
            "std": float(np.std(values)),
            "count": int(values.size),
        }

    @staticmethod
    def standard_error(values: np.ndarray) -> float:
        """均值的标准误（样本标准差 / √n），少于两个样本时为0"""
        values = np.asarray(values, dtype=float)
        values = values[np.isfinite(values)]
        if values.size < 2:
            return 0.0
        return float(stats.sem(values))

    @staticmethod
    def binomial_band(p: float, trials: int, width: float = 3.0) -> Tuple[float, float]:
        """二项比例的正态近似区间 p ± width·√(p(1-p)/n)，截断到 [0, 1]

        示例：
            ```python
            StatisticsCalculator.binomial_band(0.9, 10**6)  # (0.8991, 0.9009)
            ```
        """
        if trials < 1:
            raise ValueError("试验次数必须为正")
        half = width * math.sqrt(p * (1.0 - p) / trials)
        return max(0.0, p - half), min(1.0, p + half)

    @staticmethod
    def containment_fraction(empirical: np.ndarray, bound: np.ndarray) -> float:
        """empirical <= bound 成立的比例"""
        empirical = np.asarray(empirical, dtype=float)
        bound = np.asarray(bound, dtype=float)
        if empirical.shape != bound.shape:
            raise ValueError("经验值与上界长度不一致")
        if empirical.size == 0:
            return 1.0
        return float(np.mean(empirical <= bound))
