"""
基础绘图模块，定义绘图器基类与标准绘图流程。

绘图器在构造时接收一张统计表（pandas.DataFrame），plot() 依次完成
验证、建图、绘制、样式、元素与布局，save() 按路径后缀输出 pdf 或 png。
推荐用 with 语句使用，退出时释放图形资源。
"""

import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib
import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

from static_plot.base.base_config import BasePlotConfig
from static_plot.base.base_style import BaseStyleManager
from static_plot.base.validators import ConfigValidator, DataValidator

logger = logging.getLogger(__name__)


class BasePlotter(ABC):
    """基础绘图类

    工作流程：
    1. 初始化：保存数据，创建样式管理器并验证配置
    2. plot()：验证数据、建图、绘制、应用样式、添加元素、调整布局
    3. save()：写出图形文件
    4. close()：释放图形

    属性说明：
        data (pd.DataFrame): 输入统计表
        config (BasePlotConfig): 绘图配置
        fig (Optional[plt.Figure]): 图形对象
        ax (Optional[plt.Axes]): 坐标轴对象
        style_manager (BaseStyleManager): 样式管理器

    示例：
        ```python
        class MyPlotter(BasePlotter):
            required_columns = ("k", "value")

            def draw_plot(self):
                self.ax.plot(self.data["k"], self.data["value"])

        with MyPlotter(frame) as plotter:
            plotter.plot()
            plotter.save("out/figure.pdf")
        ```
    """

    required_columns: Sequence[str] = ()

    def __init__(self, data: pd.DataFrame, config: Optional[BasePlotConfig] = None):
        """初始化绘图器

        Args:
            data: 统计表
            config: 绘图配置，None 时使用默认配置

        Raises:
            ValueError: 配置无效时抛出
        """
        self.data = data
        self.config = config or self.default_config()
        self.fig: Optional[plt.Figure] = None
        self.ax: Optional[plt.Axes] = None
        self.style_manager = self.create_style_manager()
        self.validate_config()

    def default_config(self) -> BasePlotConfig:
        return BasePlotConfig()

    def create_style_manager(self) -> BaseStyleManager:
        return BaseStyleManager(self.config)

    def __enter__(self) -> "BasePlotter":
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        self.close()

    def validate_config(self) -> None:
        ConfigValidator.validate_style_config(self.config)
        ConfigValidator.validate_element_config(self.config)

    def validate_data(self) -> None:
        """验证统计表，子类可追加检查"""
        DataValidator.validate_frame(self.data, self.required_columns)

    def plot(self) -> None:
        """按标准流程完成绘图

        Raises:
            ValueError: 数据无效时抛出
            RuntimeError: 绘图过程出错时抛出
        """
        self.validate_data()
        try:
            self.create_figure()
            self.draw_plot()
            self.style_manager.apply_style(self.ax)
            self.apply_specific_style()
            self.add_elements()
            self.fig.tight_layout()
        except Exception as e:
            self.close()
            raise RuntimeError(f"绘图失败: {e}") from e

    def create_figure(self) -> None:
        style = self.config.style
        rc = {
            "font.family": style.font_params["family"],
            "font.size": style.font_params["size"],
            **style.rc_params,
        }
        with sns.plotting_context(style.context), sns.axes_style(style.style), matplotlib.rc_context(rc):
            self.fig, self.ax = plt.subplots(figsize=style.figsize, dpi=style.dpi)

    @abstractmethod
    def draw_plot(self) -> None:
        """实现具体绘图逻辑"""

    def apply_specific_style(self) -> None:
        """子类可重写以应用特定样式"""

    def add_elements(self) -> None:
        element = self.config.element
        if element.title:
            self.ax.set_title(element.title)
        if element.xlabel:
            self.ax.set_xlabel(element.xlabel)
        if element.ylabel:
            self.ax.set_ylabel(element.ylabel)

        ticks = element.tick_params
        if ticks.get("xticks") is not None:
            self.ax.set_xticks(ticks["xticks"])
        if ticks.get("yticks") is not None:
            self.ax.set_yticks(ticks["yticks"])
        if ticks.get("xlim") is not None:
            self.ax.set_xlim(ticks["xlim"])
        if ticks.get("ylim") is not None:
            self.ax.set_ylim(ticks["ylim"])

        for annotation in element.annotations:
            self.ax.annotate(**annotation)
        if element.legend and self.ax.get_legend_handles_labels()[0]:
            self.ax.legend(**element.legend_params)

    def save(self, path: Union[str, Path]) -> Path:
        """保存图形，格式由后缀决定

        Args:
            path: 输出路径

        Returns:
            Path: 实际写出的路径

        Raises:
            ValueError: 尚未绘图时抛出
            RuntimeError: 写出失败时抛出
        """
        if self.fig is None:
            raise ValueError("没有可保存的图形")
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            self.fig.savefig(path, **self.config.output_params)
        except Exception as e:
            raise RuntimeError(f"保存图形失败: {e}") from e
        logger.info("已写出图形 %s", path)
        return path

    def close(self) -> None:
        if self.fig is not None:
            plt.close(self.fig)
            self.fig = None
            self.ax = None
