import numpy as np
import pytest

from sddc.analysis.lyapunov import safety_threshold
from sddc.exceptions import InfeasibleParameterError, ValidationError
from sddc.model.mdp import PowerConditioning
from sddc.optimization.codesign import solve_codesign
from sddc.optimization.programs import SolveStatus
from sddc.optimization.separation import control_stage, power_stage_program, separation_baseline


def test_control_stage(mdp):
    result, lp = control_stage(mdp)
    assert result.ok
    assert result.objective == pytest.approx(1.0)
    assert lp.n == mdp.n_pairs
    np.testing.assert_allclose(result.x, [1.0, 0, 0, 0, 0, 0])


def test_forklift_example(mdp, channel, reference):
    result = separation_baseline(mdp, channel, reference)
    assert result.method == "separation"
    assert result.feasible
    assert result.optimal_cost == pytest.approx(2.0)
    assert result.diagnostics["control_cost"] == pytest.approx(1.0)
    np.testing.assert_allclose(result.policy.power[0], [1.0, 0.0])
    assert result.diagnostics["verified"]


def test_power_stage_mixes_to_threshold(mdp, channel, reference):
    result = separation_baseline(mdp, channel, reference, eta=0.7)
    threshold = safety_threshold(reference, 0.7)
    high = (0.9 - threshold) / 0.5
    assert result.optimal_cost == pytest.approx(2.0 + 3.0 * high, abs=1e-6)
    assert result.policy.power[0][1] == pytest.approx(high, abs=1e-6)
    assert result.safety.satisfied or result.diagnostics["verified"]


@pytest.mark.parametrize("eta", [None, 0.5, 0.6, 0.7])
def test_codesign_not_worse(mdp, channel, reference, eta):
    separated = separation_baseline(mdp, channel, reference, eta=eta)
    joint = solve_codesign(mdp, channel, reference, eta=eta)
    assert joint.feasible
    if separated.feasible:
        assert joint.optimal_cost <= separated.optimal_cost + 1e-7


def test_separation_infeasible_where_codesign_is_not(mdp, channel, reference):
    # 阈值低于 θ(s1, H) = 0.4，停在 s1 的控制策略无法补救
    assert safety_threshold(reference, 0.45) < 0.4
    separated = separation_baseline(mdp, channel, reference, eta=0.45)
    assert separated.status is SolveStatus.INFEASIBLE
    assert separated.policy is None
    assert solve_codesign(mdp, channel, reference, eta=0.45).feasible


def test_almost_sure_variant(mdp, channel, reference):
    ase = separation_baseline(mdp, channel, reference, eta=0.7)
    asas = separation_baseline(mdp, channel, reference, eta=0.7, safety="asas")
    assert asas.feasible
    assert asas.safety.kind == "ASAS"
    assert asas.optimal_cost == pytest.approx(ase.optimal_cost, abs=1e-6)


def test_power_stage_program_rows(mdp, channel, stay_policy):
    pi = np.array([1.0, 0.0, 0.0])
    ase = power_stage_program(mdp, channel, stay_policy, pi, 0.5, 2.0)
    assert ase.n == 6
    np.testing.assert_allclose(ase.c, [2.0, 8.0, 0, 0, 0, 0])
    np.testing.assert_allclose(ase.A_ub, [[0.9, 0.4, 0, 0, 0, 0]])
    asas = power_stage_program(mdp, channel, stay_policy, pi, 0.5, 2.0, "asas", PowerConditioning.SOURCE)
    assert asas.A_ub.shape == (3, 6)
    # s2 选 a2：0.9·θ(s1,·) + 0.1·θ(s2,·)，按 s2 的功率选择
    np.testing.assert_allclose(asas.A_ub[1], [0, 0, 0.86, 0.39, 0, 0])
    with pytest.raises(ValidationError):
        power_stage_program(mdp, channel, stay_policy, pi, 0.5, 1.0, "psp")


def test_rejects_non_positive_lambda(mdp, channel, reference):
    with pytest.raises(InfeasibleParameterError):
        separation_baseline(mdp, channel, reference, lambda_weight=-1.0)
