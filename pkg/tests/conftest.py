"""
测试公共夹具：三状态MDP、两档功率信道、直流电机对象与参考证书。
"""
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import pytest

from sddc.analysis.lyapunov import reference_certificate, verify_mlf
from sddc.cli.presets import dc_motor, forklift_channel, forklift_mdp
from sddc.model.channel import PowerChannel
from sddc.model.mdp import JointPolicy, Mdp

ROOT = Path(__file__).resolve().parents[1]
BUNDLED_SCENARIO = ROOT / "scenarios" / "dc_motor_tables.json"


@pytest.fixture
def mdp() -> Mdp:
    return forklift_mdp()


@pytest.fixture
def channel() -> PowerChannel:
    return forklift_channel()


@pytest.fixture
def plant():
    return dc_motor()


@pytest.fixture
def zero_input_plant():
    return dc_motor(drop_mode="zero_input")


@pytest.fixture
def reference():
    return reference_certificate()


@pytest.fixture
def recomputed(plant, reference):
    return verify_mlf(plant, reference.P0, reference.P1)


@pytest.fixture
def stay_policy(mdp, channel) -> JointPolicy:
    """每个状态选 a_i、高功率"""
    return JointPolicy.deterministic(mdp, channel, ["a1", "a2", "a3"], "H")


@pytest.fixture
def scenario_data() -> dict:
    return json.loads(BUNDLED_SCENARIO.read_text(encoding="utf-8"))


@pytest.fixture
def scenario_file(tmp_path, scenario_data):
    """写到临时目录的场景副本，可在测试中修改后重写"""
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(scenario_data), encoding="utf-8")
    return path

