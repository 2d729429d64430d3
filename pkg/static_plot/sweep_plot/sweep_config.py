"""
扫描图配置，继承 BasePlotConfig。
"""
from dataclasses import dataclass, field
from typing import Any, Dict

from static_plot.base.base_config import BasePlotConfig, ElementConfig


@dataclass
class SweepPlotConfig(BasePlotConfig):
    """扫描图配置类

    属性说明：
        codesign_params (Dict[str, Any]): 协同设计曲线的 ax.plot 参数
        separation_params (Dict[str, Any]): 分离设计曲线的 ax.plot 参数
        infeasible_params (Dict[str, Any]): 分离设计无可行解标记的 ax.plot 参数，
            标记画在坐标轴底部
        show_separation (bool): 是否绘制分离设计
    """
    element: ElementConfig = field(default_factory=lambda: ElementConfig(ylabel="optimal cost"))
    codesign_params: Dict[str, Any] = field(default_factory=lambda: {
        "linestyle": "-", "linewidth": 1.0, "marker": "o", "markersize": 3.0,
    })
    separation_params: Dict[str, Any] = field(default_factory=lambda: {
        "linestyle": "--", "linewidth": 1.0, "marker": "s", "markersize": 3.0, "alpha": 0.8,
    })
    infeasible_params: Dict[str, Any] = field(default_factory=lambda: {
        "linestyle": "none", "marker": "x", "markersize": 4.0,
    })
    show_separation: bool = True
