"""
内置算例：叉车直流电机与三状态MDP、两档发射功率的信道。
"""
from typing import Mapping, Optional, Tuple

from sddc.model.channel import PowerChannel
from sddc.model.mdp import Mdp
from sddc.model.plant import LinearSwitchedPlant, dc_motor_preset

FORKLIFT_STATES = ("s1", "s2", "s3")

# {状态: {动作: (到 s1、s2、s3 的转移概率, c_M)}}
FORKLIFT_MDP = {
    "s1": {"a1": ((1.0, 0.0, 0.0), 1.0), "b1": ((0.2, 0.0, 0.8), 2.0)},
    "s2": {"a2": ((0.9, 0.1, 0.0), 2.0), "b2": ((0.0, 0.2, 0.8), 4.0)},
    "s3": {"a3": ((0.1, 0.0, 0.9), 4.0), "b3": ((0.0, 0.8, 0.2), 2.0)},
}

FORKLIFT_LEVELS = {"L": 1.0, "H": 2.0}
FORKLIFT_POWER_COST = {"L": 1.0, "H": 4.0}
FORKLIFT_DROPOUT = {
    "s1": {"L": 0.9, "H": 0.4},
    "s2": {"L": 0.5, "H": 0.3},
    "s3": {"L": 0.4, "H": 0.2},
}

PRESETS = ("forklift", "dc_motor")


def forklift_mdp() -> Mdp:
    """三状态、每状态两个动作的MDP"""
    return Mdp.from_mapping({
        "states": list(FORKLIFT_STATES),
        "actions": {
            s: {
                a: {"transition": dict(zip(FORKLIFT_STATES, row)), "cost": cost}
                for a, (row, cost) in actions.items()
            }
            for s, actions in FORKLIFT_MDP.items()
        },
    })


def forklift_channel(
    theta_overrides: Optional[Mapping[Tuple[str, str], float]] = None,
    allow_certain_loss: bool = False,
) -> PowerChannel:
    """两档功率的状态相关丢包信道

    Args:
        theta_overrides: {(状态, 功率等级): θ} 形式的覆盖值，例如 {("s1", "L"): 0.95}
        allow_certain_loss: 是否允许 θ = 1

    Returns:
        PowerChannel: 表格模式信道
    """
    table = {s: dict(row) for s, row in FORKLIFT_DROPOUT.items()}
    for (s, p), value in (theta_overrides or {}).items():
        table[s][p] = float(value)
    return PowerChannel.from_table(FORKLIFT_STATES, FORKLIFT_LEVELS, table, FORKLIFT_POWER_COST,
                                   allow_certain_loss=allow_certain_loss)


def dc_motor(drop_mode: str = "estimate", disturbance_bound: float = 0.0) -> LinearSwitchedPlant:
    return dc_motor_preset(drop_mode=drop_mode, disturbance_bound=disturbance_bound)
