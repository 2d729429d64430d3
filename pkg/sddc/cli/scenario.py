"""
场景文件加载模块。

场景文件为带 "schema": 1 版本号的JSON，按严格模式解析：
缺少必填字段或出现未知字段时抛出 SchemaError，并给出 ``$.a.b`` 形式的字段路径。

顶层字段：
- schema（必填）：1
- mdp（必填）："forklift" 或 {"states", "actions"}
- channel（必填）："forklift" 或 {"levels", "power_cost", "dropout_table" | "rayleigh", "allow_certain_loss"?}
- plant（必填）："dc_motor"、{"preset", "drop_mode"?, "Mw"?} 或 {"F", "G", "K", "T"?, "Mw"?, "drop_mode"?}
- certificate（必填）："reference"、{"verify": {"P0", "P1", "margin"?, "compare_reference"?}}
  或 {"P0", "P1", "lambda0", "lambda1", "rho", ...}
- lambda（必填）：功率代价权重
- name、safety、montecarlo、policy（可选）
"""
import json
import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np

from sddc.analysis.lyapunov import (
    DEFAULT_MARGIN,
    MlfCertificate,
    compare_with_reference,
    reference_certificate,
    verify_mlf,
)
from sddc.analysis.safety import ASAS, ASE, PSP
from sddc.cli.presets import dc_motor, forklift_channel, forklift_mdp
from sddc.exceptions import SchemaError, SddcError
from sddc.model.channel import PowerChannel
from sddc.model.mdp import JointPolicy, Mdp, PowerConditioning
from sddc.model.plant import DROP_MODES, LinearSwitchedPlant

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SAFETY_KINDS = (ASE, ASAS, PSP)


class SchemaValidator:
    """场景字段验证器

    所有方法都是静态方法，失败时抛出带字段路径的 SchemaError。
    """

    @staticmethod
    def mapping(value: Any, path: str) -> Mapping[str, Any]:
        if not isinstance(value, Mapping):
            raise SchemaError("必须是JSON对象", path=path, actual=type(value).__name__)
        return value

    @staticmethod
    def keys(obj: Mapping[str, Any], path: str, required: Iterable[str], optional: Iterable[str] = ()) -> None:
        """检查必填字段齐全且没有未知字段"""
        required, optional = list(required), list(optional)
        for key in required:
            if key not in obj:
                raise SchemaError("缺少必填字段", path=f"{path}.{key}")
        allowed = set(required) | set(optional)
        for key in obj:
            if key not in allowed:
                raise SchemaError("未知字段", path=f"{path}.{key}", allowed=sorted(allowed))

    @staticmethod
    def number(value: Any, path: str, minimum: Optional[float] = None, maximum: Optional[float] = None,
               integer: bool = False) -> Union[int, float]:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError("必须是数值", path=path, actual=repr(value))
        if integer and not isinstance(value, int):
            raise SchemaError("必须是整数", path=path, actual=value)
        if not math.isfinite(value):
            raise SchemaError("必须是有限数", path=path)
        if minimum is not None and value < minimum:
            raise SchemaError(f"不能小于 {minimum}", path=path, actual=value)
        if maximum is not None and value > maximum:
            raise SchemaError(f"不能大于 {maximum}", path=path, actual=value)
        return value

    @staticmethod
    def string(value: Any, path: str, choices: Optional[Iterable[str]] = None) -> str:
        if not isinstance(value, str):
            raise SchemaError("必须是字符串", path=path, actual=repr(value))
        if choices is not None and value not in choices:
            raise SchemaError("取值无效", path=path, actual=value, allowed=list(choices))
        return value

    @staticmethod
    def matrix(value: Any, path: str) -> np.ndarray:
        """行主序的数值矩阵（列表的列表）；一维列表原样返回为向量"""
        if not isinstance(value, list) or not value:
            raise SchemaError("必须是非空数值列表", path=path)
        if not isinstance(value[0], list):
            return np.array([SchemaValidator.number(item, f"{path}[{i}]") for i, item in enumerate(value)], dtype=float)
        rows = value
        width = len(rows[0])
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != width:
                raise SchemaError("矩阵各行长度必须相同", path=f"{path}[{i}]")
            for j, item in enumerate(row):
                SchemaValidator.number(item, f"{path}[{i}][{j}]")
        return np.array(rows, dtype=float)


@contextmanager
def _at(path: str):
    """把构造过程中的领域异常转换为带路径的 SchemaError"""
    try:
        yield
    except SchemaError:
        raise
    except SddcError as exc:
        raise SchemaError(exc.message, path=path, **exc.details) from exc


@dataclass
class SafetySpec:
    """需要检查的安全条件及其参数"""
    kinds: Tuple[str, ...] = (ASAS,)
    eta: Optional[float] = None
    delta: Optional[float] = None
    epsilon: Optional[float] = None
    r: Optional[float] = None
    conditioning: PowerConditioning = PowerConditioning.DESTINATION


@dataclass
class MonteCarloSpec:
    seed: int = 0
    paths: int = 100
    horizon: int = 40
    x0_scale: float = 1.0
    x0: Optional[List[float]] = None
    s0: Optional[str] = None
    burn_in: int = 0


@dataclass
class Scenario:
    """解析后的场景

    属性说明：
        name (str): 场景名
        mdp (Mdp): MDP
        channel (PowerChannel): 信道
        plant (LinearSwitchedPlant): 被控对象
        certificate (Dict[str, Any]): 证书描述（原样保留，见 resolve_certificate）
        lambda_weight (float): 功率代价权重 λ
        safety (SafetySpec): 安全条件设置
        montecarlo (MonteCarloSpec): 蒙特卡洛设置
        policy (Optional[JointPolicy]): 场景内给出的策略
    """
    name: str
    mdp: Mdp
    channel: PowerChannel
    plant: LinearSwitchedPlant
    certificate: Dict[str, Any]
    lambda_weight: float
    safety: SafetySpec = field(default_factory=SafetySpec)
    montecarlo: MonteCarloSpec = field(default_factory=MonteCarloSpec)
    policy: Optional[JointPolicy] = None

    def resolve_certificate(self) -> Tuple[MlfCertificate, Optional[Dict[str, Any]]]:
        """得到证书；verify 指令下重新计算并可与参考值比对

        Returns:
            Tuple[MlfCertificate, Optional[Dict[str, Any]]]: 证书与比对报告（未比对时为 None）
        """
        spec = self.certificate
        if spec.get("kind") == "reference":
            return reference_certificate(), None
        if spec.get("kind") == "verify":
            cert = verify_mlf(self.plant, spec["P0"], spec["P1"], spec.get("margin", DEFAULT_MARGIN))
            comparison = None
            if spec.get("compare_reference", False):
                comparison = compare_with_reference(cert, reference_certificate(spec["P0"]))
            return cert, comparison
        return MlfCertificate.from_mapping(spec["values"]), None


def load_scenario(source: Union[str, Path, Mapping[str, Any]]) -> Scenario:
    """加载并严格校验场景

    Args:
        source: 场景文件路径，或已解析的字典

    Returns:
        Scenario: 解析后的场景

    Raises:
        SchemaError: 字段缺失、未知字段、类型错误或领域不变量不成立时抛出

    示例：
        ```python
        scenario = load_scenario("scenarios/dc_motor_tables.json")
        cert, comparison = scenario.resolve_certificate()
        ```
    """
    if isinstance(source, Mapping):
        data = source
    else:
        try:
            data = json.loads(Path(source).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"JSON解析失败: {exc.msg}", path="$", line=exc.lineno) from exc
    v = SchemaValidator
    v.mapping(data, "$")
    v.keys(data, "$", ("schema", "mdp", "channel", "plant", "certificate", "lambda"),
           ("name", "safety", "montecarlo", "policy"))
    if data["schema"] != SCHEMA_VERSION or isinstance(data["schema"], bool):
        raise SchemaError("不支持的场景版本", path="$.schema", actual=data["schema"], expected=SCHEMA_VERSION)

    mdp = _parse_mdp(data["mdp"])
    channel = _parse_channel(data["channel"], mdp)
    plant = _parse_plant(data["plant"])
    certificate = _parse_certificate(data["certificate"], plant.n)
    lambda_weight = float(v.number(data["lambda"], "$.lambda"))
    if lambda_weight <= 0:
        raise SchemaError("功率代价权重必须为正", path="$.lambda", actual=lambda_weight)
    safety = _parse_safety(data.get("safety", {}))
    montecarlo = _parse_montecarlo(data.get("montecarlo", {}), mdp, plant.n)
    policy = None
    if "policy" in data:
        policy = parse_policy(data["policy"], mdp, channel, "$.policy")
    name = v.string(data.get("name", "scenario"), "$.name")
    logger.info("已加载场景 %s：%d 个状态，%d 个功率等级", name, mdp.n_states, channel.n_levels)
    return Scenario(name, mdp, channel, plant, certificate, lambda_weight, safety, montecarlo, policy)


def parse_policy(value: Any, mdp: Mdp, channel: PowerChannel, path: str = "$") -> JointPolicy:
    """解析 {"control": {s: {a: prob}}, "power": {s: {p: prob}}} 形式的策略"""
    v = SchemaValidator
    obj = v.mapping(value, path)
    v.keys(obj, path, ("control", "power"))
    for part in ("control", "power"):
        table = v.mapping(obj[part], f"{path}.{part}")
        for s, row in table.items():
            for key, prob in v.mapping(row, f"{path}.{part}.{s}").items():
                v.number(prob, f"{path}.{part}.{s}.{key}", 0.0, 1.0)
    with _at(path):
        return JointPolicy.from_mapping(mdp, channel, obj)


def load_policy(path: Union[str, Path], mdp: Mdp, channel: PowerChannel) -> JointPolicy:
    """从策略文件读取策略；文件可以是协同设计结果JSON或只含策略表的JSON"""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    SchemaValidator.mapping(data, "$")
    if "policy" in data:
        if data["policy"] is None:
            raise SchemaError("结果文件不含可用策略（求解不可行）", path="$.policy")
        return parse_policy(data["policy"], mdp, channel, "$.policy")
    return parse_policy(data, mdp, channel, "$")


def _parse_mdp(value: Any) -> Mdp:
    v = SchemaValidator
    if isinstance(value, str):
        v.string(value, "$.mdp", ("forklift",))
        return forklift_mdp()
    obj = v.mapping(value, "$.mdp")
    v.keys(obj, "$.mdp", ("states", "actions"))
    states = obj["states"]
    if not isinstance(states, list) or not states:
        raise SchemaError("必须是非空状态列表", path="$.mdp.states")
    for i, s in enumerate(states):
        v.string(s, f"$.mdp.states[{i}]")
    actions = v.mapping(obj["actions"], "$.mdp.actions")
    for s, table in actions.items():
        for a, entry in v.mapping(table, f"$.mdp.actions.{s}").items():
            where = f"$.mdp.actions.{s}.{a}"
            v.keys(v.mapping(entry, where), where, ("transition", "cost"))
            for target, prob in v.mapping(entry["transition"], f"{where}.transition").items():
                v.number(prob, f"{where}.transition.{target}", 0.0, 1.0)
            v.number(entry["cost"], f"{where}.cost", 0.0)
    with _at("$.mdp"):
        return Mdp.from_mapping(obj)


def _parse_channel(value: Any, mdp: Mdp) -> PowerChannel:
    v = SchemaValidator
    if isinstance(value, str):
        v.string(value, "$.channel", ("forklift",))
        if mdp.states != forklift_mdp().states:
            raise SchemaError("预置信道只适用于预置MDP的状态", path="$.channel")
        return forklift_channel()
    obj = v.mapping(value, "$.channel")
    v.keys(obj, "$.channel", ("levels", "power_cost"), ("dropout_table", "rayleigh", "allow_certain_loss"))
    if ("dropout_table" in obj) == ("rayleigh" in obj):
        raise SchemaError("dropout_table 与 rayleigh 必须恰好给出一个", path="$.channel")
    levels = v.mapping(obj["levels"], "$.channel.levels")
    for p, power in levels.items():
        v.number(power, f"$.channel.levels.{p}")
    cost = v.mapping(obj["power_cost"], "$.channel.power_cost")
    for key, item in cost.items():
        if isinstance(item, Mapping):
            for p, c in item.items():
                v.number(c, f"$.channel.power_cost.{key}.{p}", 0.0)
        else:
            v.number(item, f"$.channel.power_cost.{key}", 0.0)
    allow = obj.get("allow_certain_loss", False)
    if not isinstance(allow, bool):
        raise SchemaError("必须是布尔值", path="$.channel.allow_certain_loss")

    if "dropout_table" in obj:
        table = v.mapping(obj["dropout_table"], "$.channel.dropout_table")
        for s, row in table.items():
            for p, theta in v.mapping(row, f"$.channel.dropout_table.{s}").items():
                v.number(theta, f"$.channel.dropout_table.{s}.{p}", 0.0, 1.0)
        with _at("$.channel.dropout_table"):
            return PowerChannel.from_table(mdp.states, levels, table, cost, allow_certain_loss=allow)
    fading = v.mapping(obj["rayleigh"], "$.channel.rayleigh")
    v.keys(fading, "$.channel.rayleigh", ("n0_gamma0", "kappa", "h_bar"))
    v.number(fading["n0_gamma0"], "$.channel.rayleigh.n0_gamma0", 0.0)
    v.number(fading["h_bar"], "$.channel.rayleigh.h_bar", 0.0)
    kappa = v.mapping(fading["kappa"], "$.channel.rayleigh.kappa")
    for s, item in kappa.items():
        v.number(item, f"$.channel.rayleigh.kappa.{s}", 0.0)
    with _at("$.channel.rayleigh"):
        return PowerChannel.from_rayleigh(mdp.states, levels, fading["n0_gamma0"], kappa, fading["h_bar"], cost)


def _parse_plant(value: Any) -> LinearSwitchedPlant:
    v = SchemaValidator
    if isinstance(value, str):
        v.string(value, "$.plant", ("dc_motor",))
        return dc_motor()
    obj = v.mapping(value, "$.plant")
    drop_mode = v.string(obj.get("drop_mode", "estimate"), "$.plant.drop_mode", DROP_MODES)
    bound = float(v.number(obj.get("Mw", 0.0), "$.plant.Mw", 0.0))
    if "preset" in obj:
        v.keys(obj, "$.plant", ("preset",), ("drop_mode", "Mw"))
        v.string(obj["preset"], "$.plant.preset", ("dc_motor",))
        return dc_motor(drop_mode, bound)
    v.keys(obj, "$.plant", ("F", "G", "K"), ("T", "Mw", "drop_mode"))
    matrices = {name: v.matrix(obj[name], f"$.plant.{name}") for name in ("F", "G", "K")}
    T = float(v.number(obj.get("T", 1.0), "$.plant.T"))
    with _at("$.plant"):
        return LinearSwitchedPlant(matrices["F"], matrices["G"], matrices["K"], T, bound, drop_mode)


def _parse_certificate(value: Any, n: int) -> Dict[str, Any]:
    v = SchemaValidator
    if isinstance(value, str):
        v.string(value, "$.certificate", ("reference",))
        return {"kind": "reference"}
    obj = v.mapping(value, "$.certificate")
    if "verify" in obj:
        v.keys(obj, "$.certificate", ("verify",))
        directive = v.mapping(obj["verify"], "$.certificate.verify")
        v.keys(directive, "$.certificate.verify", ("P0", "P1"), ("margin", "compare_reference"))
        spec: Dict[str, Any] = {"kind": "verify"}
        for name in ("P0", "P1"):
            spec[name] = _square(v.matrix(directive[name], f"$.certificate.verify.{name}"), n,
                                 f"$.certificate.verify.{name}")
        if "margin" in directive:
            spec["margin"] = float(v.number(directive["margin"], "$.certificate.verify.margin", 0.0))
        compare = directive.get("compare_reference", False)
        if not isinstance(compare, bool):
            raise SchemaError("必须是布尔值", path="$.certificate.verify.compare_reference")
        spec["compare_reference"] = compare
        return spec
    v.keys(obj, "$.certificate", ("P0", "P1", "lambda0", "lambda1", "rho"),
           ("alpha1_coeff", "alpha2_coeff", "chi_coeff"))
    values: Dict[str, Any] = {}
    for name in ("P0", "P1"):
        values[name] = _square(v.matrix(obj[name], f"$.certificate.{name}"), n, f"$.certificate.{name}").tolist()
    for name in ("lambda0", "lambda1", "rho", "alpha1_coeff", "alpha2_coeff", "chi_coeff"):
        if name in obj:
            values[name] = float(v.number(obj[name], f"$.certificate.{name}", 0.0))
    with _at("$.certificate"):
        MlfCertificate.from_mapping(values)
    return {"kind": "explicit", "values": values}


def _square(matrix: np.ndarray, n: int, path: str) -> np.ndarray:
    if matrix.shape != (n, n):
        raise SchemaError("矩阵维度必须与对象状态维数一致", path=path, expected=[n, n], actual=list(matrix.shape))
    return matrix


def _parse_safety(value: Any) -> SafetySpec:
    v = SchemaValidator
    obj = v.mapping(value, "$.safety")
    v.keys(obj, "$.safety", (), ("kind", "eta", "delta", "epsilon", "r", "conditioning"))
    kind = obj.get("kind", ASAS)
    kinds = [kind] if isinstance(kind, str) else kind
    if not isinstance(kinds, list) or not kinds:
        raise SchemaError("必须是安全条件名或其列表", path="$.safety.kind")
    # 大小写不敏感，内部统一为大写
    kinds = [v.string(item, f"$.safety.kind[{i}]").upper() for i, item in enumerate(kinds)]
    for i, item in enumerate(kinds):
        v.string(item, f"$.safety.kind[{i}]", SAFETY_KINDS)
    spec = SafetySpec(kinds=tuple(kinds))
    for name in ("eta", "delta", "epsilon", "r"):
        if name in obj:
            setattr(spec, name, float(v.number(obj[name], f"$.safety.{name}", 0.0)))
    if "conditioning" in obj:
        choice = v.string(obj["conditioning"], "$.safety.conditioning", [c.value for c in PowerConditioning])
        spec.conditioning = PowerConditioning(choice)
    if PSP in spec.kinds:
        for name in ("eta", "delta", "epsilon"):
            if getattr(spec, name) is None:
                raise SchemaError("PSP 检查需要该参数", path=f"$.safety.{name}")
    return spec


def _parse_montecarlo(value: Any, mdp: Mdp, n: int) -> MonteCarloSpec:
    v = SchemaValidator
    obj = v.mapping(value, "$.montecarlo")
    v.keys(obj, "$.montecarlo", (), ("seed", "paths", "horizon", "x0_scale", "x0", "s0", "burn_in"))
    spec = MonteCarloSpec()
    spec.seed = int(v.number(obj.get("seed", spec.seed), "$.montecarlo.seed", 0, 2 ** 64 - 1, integer=True))
    spec.paths = int(v.number(obj.get("paths", spec.paths), "$.montecarlo.paths", 1, integer=True))
    spec.horizon = int(v.number(obj.get("horizon", spec.horizon), "$.montecarlo.horizon", 1, integer=True))
    spec.burn_in = int(v.number(obj.get("burn_in", spec.burn_in), "$.montecarlo.burn_in", 0,
                                spec.horizon - 1, integer=True))
    spec.x0_scale = float(v.number(obj.get("x0_scale", spec.x0_scale), "$.montecarlo.x0_scale", 0.0))
    if "x0" in obj:
        x0 = v.matrix(obj["x0"], "$.montecarlo.x0").reshape(-1)
        if x0.size != n:
            raise SchemaError("初始状态维度错误", path="$.montecarlo.x0", expected=n, actual=int(x0.size))
        spec.x0 = x0.tolist()
    if "s0" in obj:
        spec.s0 = v.string(obj["s0"], "$.montecarlo.s0", mdp.states)
    return spec
