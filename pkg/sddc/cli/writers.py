"""
结果文件输出模块。

CSV 使用固定列顺序、17位有效数字的浮点数，缺失值写为 N/A；
JSON 带 "schema": 1 字段，键按字典序排列，非有限浮点数写为 null。
相同输入总是得到逐字节相同的文件。
"""
import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Union

import numpy as np
import pandas as pd

from sddc.cli.scenario import SCHEMA_VERSION

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
NA_REP = "N/A"


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """写出CSV文件"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep=NA_REP, lineterminator="\n")
    logger.info("已写出 %s（%d 行）", path, len(frame))
    return path


def to_jsonable(value: Any) -> Any:
    """递归转换为JSON可表示的值"""
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(data: Mapping[str, Any]) -> str:
    payload = {"schema": SCHEMA_VERSION, **to_jsonable(data)}
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def write_json(data: Mapping[str, Any], path: Union[str, Path]) -> Path:
    """写出带版本号的JSON文件"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data), encoding="utf-8")
    logger.info("已写出 %s", path)
    return path
