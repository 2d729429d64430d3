"""
轨迹图绘制器：输入蒙特卡洛逐步统计表（列 k,max,min,mean,emp_EV，可选 envelope），
在对数坐标上绘制状态范数的上下界、经验 Lyapunov 期望以及理论包络。
"""
from typing import Optional

import numpy as np
import pandas as pd

from static_plot.base.base_plotter import BasePlotter
from static_plot.base.validators import ConfigValidator, DataValidator
from static_plot.trajectory_plot.trajectory_config import TrajectoryPlotConfig


class TrajectoryPlotter(BasePlotter):
    """轨迹图绘制器

    示例：
        ```python
        frame = stats.to_frame(envelope)
        with TrajectoryPlotter(frame) as plotter:
            plotter.plot()
            plotter.save("out/simulate.pdf")
        ```
    """

    required_columns = ("k", "max", "min")
    config: TrajectoryPlotConfig

    def __init__(self, data: pd.DataFrame, config: Optional[TrajectoryPlotConfig] = None):
        super().__init__(data, config)

    def default_config(self) -> TrajectoryPlotConfig:
        return TrajectoryPlotConfig()

    def validate_config(self) -> None:
        super().validate_config()
        for name, params in self.config.series.items():
            ConfigValidator.validate_line_params(params, name)
        if not 0 <= self.config.band_alpha <= 1:
            raise ValueError("填充带透明度必须在0到1之间")

    def validate_data(self) -> None:
        super().validate_data()
        columns = [c for c in self.config.series if c in self.data.columns]
        DataValidator.validate_numeric(self.data, ["k", *columns])

    def draw_plot(self) -> None:
        k = self.data["k"].to_numpy()
        present = [c for c in self.config.series if c in self.data.columns]
        colors = self.style_manager.colors(len(present))
        for color, column in zip(colors, present):
            params = {"color": color, **self.config.series[column]}
            values = self.data[column].to_numpy(dtype=float)
            # 对数坐标下非正值不可画
            values = np.where(values > 0, values, np.nan)
            self.ax.plot(k, values, **params)
        if self.config.band_alpha > 0:
            lower = self.data["min"].to_numpy(dtype=float)
            upper = self.data["max"].to_numpy(dtype=float)
            self.ax.fill_between(k, np.where(lower > 0, lower, np.nan), upper,
                                 color=colors[0], alpha=self.config.band_alpha, linewidth=0)
