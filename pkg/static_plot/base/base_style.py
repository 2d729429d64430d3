"""
样式管理模块。BaseStyleManager 统一设置边框、刻度、网格与坐标刻度类型，
具体图表的样式管理器在此基础上只补充各自的线型与配色。
"""

from typing import List, Tuple

import matplotlib.pyplot as plt
import seaborn as sns

from static_plot.base.base_config import BasePlotConfig


class BaseStyleManager:
    """基础样式管理器类

    属性说明：
        config (BasePlotConfig): 绘图配置

    示例：
        ```python
        manager = BaseStyleManager(BasePlotConfig())
        fig, ax = plt.subplots()
        manager.apply_style(ax)
        ```
    """

    def __init__(self, config: BasePlotConfig):
        self.config = config

    def colors(self, n: int) -> List[Tuple[float, float, float]]:
        """返回配置调色板中的 n 种颜色"""
        return list(sns.color_palette(self.config.style.palette, max(n, 1)))

    def apply_style(self, ax: plt.Axes) -> None:
        """依次应用坐标刻度类型、边框、刻度与网格"""
        if ax is None:
            return
        if self.config.element.log_y:
            ax.set_yscale("log", nonpositive="mask")
        self.apply_spines(ax)
        self.apply_ticks(ax)
        self.apply_grid(ax)

    def apply_spines(self, ax: plt.Axes) -> None:
        style = self.config.style
        for spine in ax.spines.values():
            spine.set_linewidth(style.spine_width)
            spine.set_color(style.spine_color)

    def apply_ticks(self, ax: plt.Axes) -> None:
        style = self.config.style
        common = dict(direction=style.tick_direction, color=style.tick_color, top=True, right=True)
        ax.tick_params(which="major", width=style.tick_width, length=style.tick_length, **common)
        if style.minor_ticks:
            ax.minorticks_on()
            ax.tick_params(which="minor", width=style.minor_tick_width,
                           length=style.minor_tick_length, **common)

    def apply_grid(self, ax: plt.Axes) -> None:
        if self.config.style.grid:
            ax.grid(True, which="major", **self.config.style.grid_params)
        else:
            ax.grid(False)
