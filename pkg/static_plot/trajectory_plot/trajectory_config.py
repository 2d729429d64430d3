"""
轨迹图配置，继承 BasePlotConfig，补充每条统计曲线的线型。
"""
from dataclasses import dataclass, field
from typing import Any, Dict

from static_plot.base.base_config import BasePlotConfig, ElementConfig


@dataclass
class TrajectoryPlotConfig(BasePlotConfig):
    """轨迹图配置类

    属性说明：
        series (Dict[str, Dict[str, Any]]): 统计表列名到 ax.plot 参数的映射，
            只绘制表中存在的列，顺序即图例顺序
        band_alpha (float): max 与 min 之间填充带的透明度，0 表示不填充
    """
    element: ElementConfig = field(default_factory=lambda: ElementConfig(
        xlabel=r"$k$",
        ylabel=r"$\|x_k\|$, $V$",
        log_y=True,
    ))
    series: Dict[str, Dict[str, Any]] = field(default_factory=lambda: {
        "max": {"label": r"$\max\|x_k\|_\infty$", "linestyle": "-", "linewidth": 0.9},
        "min": {"label": r"$\min\|x_k\|_\infty$", "linestyle": "-", "linewidth": 0.9},
        "mean": {"label": r"mean $\|x_k\|_\infty$", "linestyle": "--", "linewidth": 0.8},
        "emp_EV": {"label": r"empirical $E[V]$", "linestyle": "-", "linewidth": 1.1,
                   "marker": "o", "markersize": 2.0},
        "envelope": {"label": "envelope", "linestyle": ":", "linewidth": 1.2, "color": "black"},
    })
    band_alpha: float = 0.15
