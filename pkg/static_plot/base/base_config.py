"""
绘图配置模块。StyleConfig 描述版式，ElementConfig 描述标题、轴标签与刻度，
BasePlotConfig 汇总两者并负责输出参数，支持点号路径更新与预设模板。
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple


@dataclass
class StyleConfig:
    """样式配置类

    属性说明：
        style (str): seaborn 主题，'ticks'、'white'、'whitegrid' 等
        context (str): seaborn 上下文，'paper'、'talk' 等
        figsize (Tuple[float, float]): 图形尺寸（英寸）
        dpi (int): 屏幕分辨率
        font_params (Dict[str, Any]): 字体族与字号
        spine_width (float): 边框线宽
        tick_direction (str): 刻度方向，'in' 或 'out'
        tick_width (float): 刻度线宽
        tick_length (float): 刻度长度
        minor_ticks (bool): 是否显示次刻度
        grid (bool): 是否显示网格
        grid_params (Dict[str, Any]): 网格参数
        palette (str): seaborn 调色板名称
        rc_params (Dict[str, Any]): 额外的 matplotlib rc 参数
    """
    style: str = "ticks"
    context: str = "paper"
    figsize: Tuple[float, float] = (3.6, 2.7)  # 单栏
    dpi: int = 150

    font_params: Dict[str, Any] = field(default_factory=lambda: {
        "family": "sans-serif",
        "size": 7,
    })

    spine_width: float = 0.8
    spine_color: str = "black"

    tick_direction: str = "in"
    tick_width: float = 0.5
    tick_length: float = 2.0
    tick_color: str = "black"
    minor_ticks: bool = False
    minor_tick_width: float = 0.4
    minor_tick_length: float = 1.2

    grid: bool = True
    grid_params: Dict[str, Any] = field(default_factory=lambda: {
        "linestyle": ":",
        "linewidth": 0.4,
        "alpha": 0.5,
        "color": "grey",
    })

    palette: str = "colorblind"

    rc_params: Dict[str, Any] = field(default_factory=lambda: {
        "font.sans-serif": ["DejaVu Sans", "Arial"],
        "axes.unicode_minus": False,
        "legend.frameon": False,
    })


@dataclass
class ElementConfig:
    """元素配置类

    属性说明：
        title (Optional[str]): 图形标题
        xlabel (Optional[str]): X 轴标签
        ylabel (Optional[str]): Y 轴标签
        log_y (bool): Y 轴是否使用对数刻度
        legend (bool): 是否绘制图例
        legend_params (Dict[str, Any]): 传给 ax.legend 的参数
        tick_params (Dict[str, Any]): xticks / yticks / xlim / ylim，None 表示自动
        annotations (List[Dict[str, Any]]): 传给 ax.annotate 的注释列表
    """
    title: Optional[str] = None
    xlabel: Optional[str] = None
    ylabel: Optional[str] = None
    log_y: bool = False
    legend: bool = True
    legend_params: Dict[str, Any] = field(default_factory=lambda: {"loc": "best", "fontsize": 6})
    tick_params: Dict[str, Any] = field(default_factory=lambda: {
        "xticks": None,
        "yticks": None,
        "xlim": None,
        "ylim": None,
    })
    annotations: List[Dict[str, Any]] = field(default_factory=list)


@dataclass
class BasePlotConfig:
    """基础绘图配置类

    属性说明：
        style (StyleConfig): 样式配置
        element (ElementConfig): 元素配置
        output_params (Dict[str, Any]): 传给 savefig 的参数，格式由保存路径后缀决定

    示例：
        ```python
        config = BasePlotConfig.create_template("presentation")
        config.update({"element.log_y": True, "style.font_params.size": 9})
        ```
    """
    style: StyleConfig = field(default_factory=StyleConfig)
    element: ElementConfig = field(default_factory=ElementConfig)
    output_params: Dict[str, Any] = field(default_factory=lambda: {
        "dpi": 300,
        "bbox_inches": "tight",
    })

    def update(self, config_dict: Dict[str, Any]) -> None:
        """按点号路径更新配置，路径中的字典层级直接改写键值

        Args:
            config_dict: 例如 {"style.font_params.size": 8, "element.title": "..."}

        Raises:
            KeyError: 路径不存在时抛出
        """
        for key, value in config_dict.items():
            parts = key.split(".")
            obj: Any = self
            for part in parts[:-1]:
                obj = obj[part] if isinstance(obj, dict) else getattr(obj, part)
            last = parts[-1]
            if isinstance(obj, dict):
                obj[last] = value
            elif hasattr(obj, last):
                setattr(obj, last, value)
            else:
                raise KeyError(f"未知配置项: {key}")

    @classmethod
    def create_template(cls, template_name: str) -> "BasePlotConfig":
        """创建预设模板

        Args:
            template_name: "paper" 或 "presentation"，其他名称返回默认配置
        """
        templates = {
            "paper": {
                "style.figsize": (3.6, 2.7),
                "style.font_params.size": 7,
            },
            "presentation": {
                "style.figsize": (6.4, 4.8),
                "style.context": "talk",
                "style.font_params.size": 12,
                "element.legend_params.fontsize": 10,
            },
        }
        config = cls()
        config.update(templates.get(template_name, {}))
        return config
