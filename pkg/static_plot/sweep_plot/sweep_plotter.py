"""
扫描图绘制器：输入参数扫描表（列 eta,theta,lambda,cost_codesign,cost_separation,feasible_sep），
以 η 或 θ 为横轴，每个其余参数组合画一对协同设计/分离设计曲线，
分离设计无可行解的网格点在坐标轴底部以叉号标出。
"""
from typing import List, Optional, Tuple

import pandas as pd
from matplotlib.transforms import blended_transform_factory

from static_plot.base.base_plotter import BasePlotter
from static_plot.base.validators import ConfigValidator, DataValidator
from static_plot.sweep_plot.sweep_config import SweepPlotConfig

AXES = {"eta": r"$\eta$", "theta": r"$\theta$"}


class SweepPlotter(BasePlotter):
    """扫描图绘制器

    Args:
        data: sweep() 或对比表复现输出的表
        x: 横轴列，"eta" 或 "theta"
        config: 绘图配置

    示例：
        ```python
        frame = sweep(mdp, channel, cert, etas=[0.4, 0.5, 0.6, 0.7])
        with SweepPlotter(frame, x="eta") as plotter:
            plotter.plot()
            plotter.save("out/sweep.png")
        ```
    """

    required_columns = ("eta", "theta", "lambda", "cost_codesign", "cost_separation", "feasible_sep")
    config: SweepPlotConfig

    def __init__(self, data: pd.DataFrame, x: str = "eta", config: Optional[SweepPlotConfig] = None):
        if x not in AXES:
            raise ValueError(f"横轴必须是 {sorted(AXES)} 之一")
        self.x = x
        super().__init__(data, config)

    def default_config(self) -> SweepPlotConfig:
        return SweepPlotConfig()

    def validate_config(self) -> None:
        super().validate_config()
        for name in ("codesign_params", "separation_params", "infeasible_params"):
            ConfigValidator.validate_line_params(getattr(self.config, name), name)

    def validate_data(self) -> None:
        super().validate_data()
        DataValidator.validate_numeric(self.data, ["eta", "theta", "lambda", "cost_codesign", "cost_separation"])

    def groups(self) -> List[Tuple[str, pd.DataFrame]]:
        """按非横轴参数分组，返回 (图例标签, 按横轴排序的子表)"""
        keys = [c for c in ("theta", "eta", "lambda") if c != self.x]
        keys = [c for c in keys if self.data[c].nunique() > 1] or keys[:1]
        result = []
        for values, group in self.data.groupby(keys, sort=True):
            values = values if isinstance(values, tuple) else (values,)
            label = ", ".join(f"{AXES.get(k, k)}={v:g}" for k, v in zip(keys, values))
            result.append((label, group.sort_values(self.x)))
        return result

    def draw_plot(self) -> None:
        groups = self.groups()
        colors = self.style_manager.colors(len(groups))
        bottom = blended_transform_factory(self.ax.transData, self.ax.transAxes)
        for color, (label, group) in zip(colors, groups):
            x = group[self.x].to_numpy(dtype=float)
            self.ax.plot(x, group["cost_codesign"].to_numpy(dtype=float), color=color,
                         label=f"co-design {label}", **self.config.codesign_params)
            if not self.config.show_separation:
                continue
            self.ax.plot(x, group["cost_separation"].to_numpy(dtype=float), color=color,
                         label=f"separation {label}", **self.config.separation_params)
            infeasible = ~group["feasible_sep"].astype(bool).to_numpy()
            if infeasible.any():
                self.ax.plot(x[infeasible], [0.03] * int(infeasible.sum()), color=color,
                             transform=bottom, clip_on=False, **self.config.infeasible_params)

    def apply_specific_style(self) -> None:
        if not self.config.element.xlabel:
            self.ax.set_xlabel(AXES[self.x])
