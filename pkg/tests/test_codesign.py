import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from builders import long_run_cost, policy_grid, random_channel, random_mdp, random_policy, two_state_problem
from sddc.analysis.lyapunov import reference_certificate, safety_threshold
from sddc.analysis.safety import check_asas
from sddc.cli.presets import forklift_channel
from sddc.exceptions import InfeasibleParameterError, ValidationError
from sddc.model.channel import PowerChannel
from sddc.model.mdp import JointPolicy, Mdp, PowerConditioning, joint_chain, stationary_distribution
from sddc.optimization.codesign import (
    OccupationMeasure,
    build_lp,
    build_q_matrix,
    build_qp,
    extract_policies_lp,
    extract_policies_qp,
    solve_codesign,
)
from sddc.optimization.programs import SolveStatus

ZERO_THETA = {(s, p): 0.0 for s in ("s1", "s2", "s3") for p in ("L", "H")}


def test_lp_layout(mdp, channel, reference):
    lp = build_lp(mdp, channel, reference, 1.0, couple_marginals=False)
    assert lp.n == 12
    assert lp.n_rows == 6
    assert lp.row_names[-1] == "safety[ASE]"
    assert lp.variable_names[0] == "X1[s1,a1]"
    assert lp.variable_names[6] == "X2[s1,L]"
    assert lp.b_ub[0] == pytest.approx(safety_threshold(reference) - 1e-9)
    assert build_lp(mdp, channel, reference, 1.0).n_rows == 9


def test_lp_rejects_non_positive_lambda(mdp, channel, reference):
    with pytest.raises(InfeasibleParameterError):
        build_lp(mdp, channel, reference, 0.0)


def test_lp_forklift_example(mdp, channel, reference):
    result = solve_codesign(mdp, channel, reference, 1.0)
    assert result.feasible
    # s1 选 a1 且用低功率：0.9 < 0.9677
    assert result.optimal_cost == pytest.approx(2.0)
    np.testing.assert_allclose(result.policy.control_of(0), [1.0, 0.0])
    np.testing.assert_allclose(result.policy.power[0], [1.0, 0.0])
    np.testing.assert_allclose(result.policy.power[1], [0.5, 0.5])
    assert result.safety.satisfied
    assert result.diagnostics["verified"]


def test_lp_binding_safety_constraint(mdp, channel, reference, stay_policy):
    result = solve_codesign(mdp, channel, reference, 1.0, eta=0.7)
    assert result.feasible
    threshold = safety_threshold(reference, 0.7)
    # 停在 s1 并混合 H 功率恰好压到阈值
    mixing = (0.9 - threshold) / 0.5
    assert 2.0 < result.optimal_cost <= 2.0 + 3.0 * mixing + 1e-6
    assert result.optimal_cost <= long_run_cost(mdp, channel, stay_policy)
    assert result.optimal_cost == pytest.approx(long_run_cost(mdp, channel, result.policy), rel=1e-7)
    assert result.safety.max_lhs == pytest.approx(threshold, abs=1e-7)
    assert result.diagnostics["verified"]


def test_lp_infeasible_channel(mdp, reference):
    lossy = forklift_channel({(s, p): 0.99 for s in ("s1", "s2", "s3") for p in ("L", "H")})
    result = solve_codesign(mdp, lossy, reference)
    assert result.status is SolveStatus.INFEASIBLE
    assert result.policy is None
    assert result.optimal_cost is None


def test_infeasible_rate_raises(mdp, channel, reference):
    with pytest.raises(InfeasibleParameterError, match="convergence rate infeasible"):
        solve_codesign(mdp, channel, reference, eta=1.0)


def test_unknown_method(mdp, channel, reference):
    with pytest.raises(ValidationError):
        solve_codesign(mdp, channel, reference, method="milp")


def test_multichain_mdp_rejected(reference):
    mdp = Mdp(("x", "y"), (("a",), ("b",)), np.eye(2), np.ones(2))
    channel = PowerChannel.from_table(("x", "y"), {"L": 1.0}, {"x": {"L": 0.1}, "y": {"L": 0.1}}, {"L": 1.0})
    with pytest.raises(ValidationError):
        build_lp(mdp, channel, reference, 1.0)
    with pytest.raises(ValidationError):
        build_qp(mdp, channel, reference, 1.0, None)


def test_zero_dropout_lp_equals_qp(mdp, reference):
    channel = forklift_channel(ZERO_THETA)
    lp = solve_codesign(mdp, channel, reference, method="lp")
    qp = solve_codesign(mdp, channel, reference, method="qp")
    assert lp.optimal_cost == pytest.approx(2.0)
    assert qp.optimal_cost == pytest.approx(2.0)
    assert qp.solver.convexity_flag == "convex"
    assert qp.safety.conditioning == "source"


def test_q_matrix(mdp, channel):
    matrices = build_q_matrix(mdp, channel, 0.5)
    assert len(matrices) == 3
    for i, Q in enumerate(matrices):
        np.testing.assert_allclose(Q, Q.T)
        span = slice(mdp.action_slice(i).start * 2, mdp.action_slice(i).stop * 2)
        outside = Q.copy()
        outside[span, span] = 0.0
        assert not np.any(outside)
    # s1 选 a1 用 L：0.5 - θ(s1, L)
    x = np.zeros(12)
    x[0] = 1.0
    assert x @ matrices[0] @ x == pytest.approx(0.5 - 0.9)
    with pytest.raises(InfeasibleParameterError):
        build_q_matrix(mdp, channel, 0.0)


def test_qp_layout(mdp, channel, reference):
    qp = build_qp(mdp, channel, reference, 1.0, None)
    assert qp.n == 12
    assert qp.linear.row_names[-1] == "normalize"
    assert [qc.name for qc in qp.quadratic] == ["safety[s1]", "safety[s2]", "safety[s3]"]
    assert [g.shape for g in qp.product_groups] == [(2, 2)] * 3


def test_two_state_problem_unconstrained():
    mdp, channel = two_state_problem()
    cert = reference_certificate()
    for method in ("lp", "qp"):
        result = solve_codesign(mdp, channel, cert, method=method)
        assert result.optimal_cost == pytest.approx(2.2)
        np.testing.assert_allclose(result.policy.control_of(0), [1.0, 0.0])
        np.testing.assert_allclose(result.policy.control_of(1), [0.0, 1.0])
        np.testing.assert_allclose(result.policy.power, [[1.0, 0.0], [1.0, 0.0]])


def test_two_state_problem_with_rate():
    mdp, channel = two_state_problem()
    cert = reference_certificate()
    result = solve_codesign(mdp, channel, cert, eta=0.7, method="qp")
    assert result.feasible
    assert 2.2 - 1e-9 <= result.optimal_cost <= 5.2 + 1e-9
    assert result.optimal_cost == pytest.approx(long_run_cost(mdp, channel, result.policy), abs=1e-6)
    assert result.diagnostics["verified"]
    assert "destination_recheck" in result.diagnostics
    assert result.diagnostics["destination_recheck"]["conditioning"] == "destination"
    pooled = solve_codesign(mdp, channel, cert, eta=0.7, method="qp", threads=2)
    np.testing.assert_array_equal(pooled.solver.x, result.solver.x)


def test_extraction_fills_unvisited_states(mdp, channel):
    x1 = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    x2 = np.array([[0.25, 0.75], [0.0, 0.0], [0.0, 0.0]])
    occupation = OccupationMeasure.split(mdp, channel, x1, x2)
    policy = extract_policies_lp(occupation)
    np.testing.assert_allclose(policy.power[0], [0.25, 0.75])
    np.testing.assert_allclose(policy.control_of(1), [0.5, 0.5])

    fallback = JointPolicy.deterministic(mdp, channel, ["a1", "b2", "b3"], "H")
    policy = extract_policies_lp(occupation, fallback)
    np.testing.assert_allclose(policy.control_of(2), [0.0, 1.0])
    np.testing.assert_allclose(policy.power[2], [0.0, 1.0])

    joint = np.zeros((6, 2))
    joint[0] = [0.5, 0.5]
    policy = extract_policies_qp(OccupationMeasure.joint(mdp, channel, joint))
    np.testing.assert_allclose(policy.power[0], [0.5, 0.5])
    np.testing.assert_allclose(policy.control_of(0), [1.0, 0.0])
    assert OccupationMeasure.joint(mdp, channel, joint).to_dict()["state_power"]["s1"] == {"L": 0.5, "H": 0.5}


@settings(max_examples=25, deadline=None, derandomize=True)
@given(seed=st.integers(0, 2 ** 32 - 1), n_states=st.integers(2, 3))
def test_lp_not_worse_than_any_safe_policy(seed, n_states):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, n_states, 2)
    channel = random_channel(rng, mdp, 2)
    policy = random_policy(rng, mdp, channel)
    cert = reference_certificate()
    pi_bar = stationary_distribution(joint_chain(mdp, channel, policy))
    assume(channel.theta_vector() @ pi_bar < safety_threshold(cert, 0.7) - 1e-6)

    result = solve_codesign(mdp, channel, cert, eta=0.7)
    assert result.feasible
    assert result.optimal_cost <= long_run_cost(mdp, channel, policy) + 1e-7
    assert result.optimal_cost == pytest.approx(long_run_cost(mdp, channel, result.policy), abs=1e-7)


SHAPES = st.sampled_from([(2, 1), (2, 2), (3, 1)])
ORACLE_SETTINGS = settings(max_examples=200, deadline=None, derandomize=True,
                           suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])


@ORACLE_SETTINGS
@given(seed=st.integers(0, 2 ** 32 - 1), shape=SHAPES, eta=st.sampled_from([None, 0.5, 0.7]))
def test_lp_not_worse_than_policy_grid(seed, shape, eta):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, *shape)
    channel = random_channel(rng, mdp, 2)
    cert = reference_certificate()
    grid = policy_grid(mdp, channel)
    safe = grid["ase"] < safety_threshold(cert, eta) - 1e-6
    assume(safe.any())

    result = solve_codesign(mdp, channel, cert, eta=eta)
    assert result.feasible
    assert result.diagnostics["verified"]
    assert result.optimal_cost <= grid["cost"][safe].min() + 1e-6
    assert result.optimal_cost == pytest.approx(long_run_cost(mdp, channel, result.policy), abs=1e-7)


@ORACLE_SETTINGS
@given(seed=st.integers(0, 2 ** 32 - 1), shape=SHAPES, eta=st.sampled_from([None, 0.5, 0.7]))
def test_qp_close_to_policy_grid(seed, shape, eta):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, *shape)
    channel = random_channel(rng, mdp, 2)
    cert = reference_certificate()
    grid = policy_grid(mdp, channel)
    safe = grid["asas"] < safety_threshold(cert, eta) - 1e-6
    assume(safe.any())

    result = solve_codesign(mdp, channel, cert, eta=eta, method="qp")
    assert result.feasible
    assert result.diagnostics["verified"]
    assert result.optimal_cost <= grid["cost"][safe].min() + 0.02
    assert result.optimal_cost == pytest.approx(long_run_cost(mdp, channel, result.policy), abs=1e-6)


def test_lp_cost_monotone_in_rate(mdp, channel, reference):
    etas = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9, None]
    results = [solve_codesign(mdp, channel, reference, eta=eta) for eta in etas]
    feasible = [r.feasible for r in results]
    # 放宽收敛率只会扩大可行域
    assert feasible == sorted(feasible)
    costs = [r.optimal_cost for r in results if r.feasible]
    assert costs
    assert all(later <= earlier + 1e-9 for earlier, later in zip(costs, costs[1:]))


@settings(max_examples=30, deadline=None, derandomize=True)
@given(seed=st.integers(0, 2 ** 32 - 1), n_states=st.integers(2, 3))
def test_lp_cost_monotone_in_rate_random(seed, n_states):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(rng, n_states, 2)
    channel = random_channel(rng, mdp, 2)
    cert = reference_certificate()
    results = [solve_codesign(mdp, channel, cert, eta=eta) for eta in (0.3, 0.5, 0.7, 0.9, None)]
    costs = [r.optimal_cost if r.feasible else np.inf for r in results]
    assert all(later <= earlier + 1e-9 for earlier, later in zip(costs, costs[1:]))


def test_qp_not_worse_than_seed_policy(mdp, channel, reference, stay_policy):
    # 全部高功率时 Σθ 不超过 0.4，低于 η = 0.7 的阈值
    assert check_asas(mdp, channel, stay_policy, reference, 0.7, PowerConditioning.SOURCE).satisfied
    seeded = solve_codesign(mdp, channel, reference, eta=0.7, method="qp", seeds=[stay_policy])
    assert seeded.feasible
    assert seeded.diagnostics["seed_policies"] >= 1
    assert seeded.optimal_cost <= long_run_cost(mdp, channel, stay_policy) + 1e-9
