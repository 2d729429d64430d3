"""
验证器模块。ConfigValidator 检查绘图配置，DataValidator 检查输入的统计表。
验证失败抛出 ValueError 并指明具体问题。
"""

from typing import Iterable

import numpy as np
import pandas as pd

from static_plot.base.base_config import BasePlotConfig


class ConfigValidator:
    """配置验证器类，全部为静态方法"""

    @staticmethod
    def validate_style_config(config: BasePlotConfig) -> None:
        """验证样式配置

        Raises:
            ValueError: 尺寸、分辨率、字体或线宽参数无效时抛出
        """
        style = config.style
        if not isinstance(style.figsize, (tuple, list)) or len(style.figsize) != 2:
            raise ValueError("图形尺寸必须是包含两个元素的元组")
        if min(style.figsize) <= 0:
            raise ValueError("图形尺寸必须为正数")
        if style.dpi <= 0:
            raise ValueError("DPI必须为正数")
        if not isinstance(style.font_params, dict) or not {"family", "size"} <= set(style.font_params):
            raise ValueError("字体参数必须是包含'family'和'size'的字典")
        if style.font_params["size"] <= 0:
            raise ValueError("字体大小必须为正数")
        for name in ("spine_width", "tick_width", "tick_length"):
            if getattr(style, name) <= 0:
                raise ValueError(f"{name}必须为正数")

    @staticmethod
    def validate_element_config(config: BasePlotConfig) -> None:
        """验证元素配置

        Raises:
            ValueError: 刻度参数或注释格式无效时抛出
        """
        if not isinstance(config.element.tick_params, dict):
            raise ValueError("刻度参数必须是字典类型")
        for annotation in config.element.annotations:
            if not isinstance(annotation, dict) or "text" not in annotation:
                raise ValueError("注释必须是包含'text'字段的字典")

    @staticmethod
    def validate_line_params(params: dict, name: str) -> None:
        """验证线型参数中的线宽、标记尺寸和透明度"""
        if params.get("linewidth", 1.0) <= 0:
            raise ValueError(f"{name}的线宽必须为正数")
        if params.get("markersize", 1.0) <= 0:
            raise ValueError(f"{name}的标记尺寸必须为正数")
        alpha = params.get("alpha", 1.0)
        if not 0 < alpha <= 1:
            raise ValueError(f"{name}的透明度必须在0到1之间")


class DataValidator:
    """数据验证器类，全部为静态方法"""

    @staticmethod
    def validate_frame(frame: pd.DataFrame, required: Iterable[str]) -> None:
        """验证统计表非空且包含所需列

        Args:
            frame: 统计表
            required: 必须存在的列名

        Raises:
            ValueError: 类型错误、为空或缺列时抛出
        """
        if not isinstance(frame, pd.DataFrame):
            raise ValueError("数据必须是 pandas.DataFrame")
        if frame.empty:
            raise ValueError("数据不能为空")
        missing = [c for c in required if c not in frame.columns]
        if missing:
            raise ValueError(f"数据缺少列: {missing}")

    @staticmethod
    def validate_numeric(frame: pd.DataFrame, columns: Iterable[str]) -> None:
        """验证列为数值类型（允许 NaN）"""
        for column in columns:
            if not np.issubdtype(frame[column].dtype, np.number):
                raise ValueError(f"列'{column}'必须是数值类型")
