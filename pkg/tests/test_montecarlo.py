import numpy as np
import pytest

from builders import long_run_cost, two_state_problem
from sddc.analysis.safety import check_asas
from sddc.cli.presets import forklift_channel
from sddc.exceptions import DimensionError, UnknownLabelError, ValidationError
from sddc.model.mdp import JointPolicy, Mdp
from sddc.model.plant import CallableSwitchedPlant
from sddc.simulation.montecarlo import ScenarioRun, empirical_vs_envelope, estimate_long_run_cost, run_paths

ZERO_THETA = {(s, p): 0.0 for s in ("s1", "s2", "s3") for p in ("L", "H")}


@pytest.fixture
def lossless(mdp, stay_policy, plant):
    run = ScenarioRun(seed=3, horizon=10, paths=5, x0=[1.0, -0.5], lyapunov_matrix=np.eye(2))
    return run_paths(run, mdp, forklift_channel(ZERO_THETA), stay_policy, plant)


def test_lossless_paths_follow_closed_loop(lossless, plant):
    assert np.all(lossless.gammas[:, 0] == -1)
    assert np.all(lossless.gammas[:, 1:] == 1)
    x = np.array([1.0, -0.5])
    expected = []
    for _ in range(11):
        expected.append(np.max(np.abs(x)))
        x = plant.closed_loop @ x
    for row in lossless.inf_norms:
        np.testing.assert_allclose(row, expected, rtol=1e-9, atol=1e-15)
    assert lossless.summary()["delivery_rate"] == 1.0
    assert lossless.flagged == []


def test_frame_and_exit_frequency(lossless):
    frame = lossless.to_frame(envelope=np.ones(11))
    assert list(frame.columns) == ["k", "max", "min", "mean", "emp_EV", "envelope", "mean_norm2"]
    assert frame["emp_EV"].iloc[0] == pytest.approx(1.25)
    assert lossless.exit_frequency(1.0) == 1.0
    assert lossless.exit_frequency(1.0, k_start=5) == 0.0
    with pytest.raises(ValidationError):
        lossless.exit_frequency(1.0, k_start=11)
    with pytest.raises(DimensionError):
        lossless.to_frame(envelope=np.ones(3))


def test_envelope_report(lossless):
    report = empirical_vs_envelope(lossless, 2.0 * lossless.emp_EV)
    assert report.fraction_below == 1.0
    np.testing.assert_allclose(report.ratio[report.envelope > 0], 0.5)
    assert report.to_dict()["quantity"] == "V"
    assert list(report.to_frame().columns) == ["k", "empirical", "envelope", "ratio"]
    tight = empirical_vs_envelope(lossless, np.zeros(11), quantity="norm2")
    assert tight.fraction_below == 0.0
    with pytest.raises(ValidationError):
        empirical_vs_envelope(lossless, np.ones(11), quantity="max")
    with pytest.raises(DimensionError):
        empirical_vs_envelope(lossless, np.ones(4))


def test_seed_and_threads_reproducible(mdp, channel, plant):
    def sample(**changes):
        run = ScenarioRun(seed=2024, horizon=30, paths=40, **changes)
        return run_paths(run, mdp, channel, JointPolicy.uniform(mdp, channel), plant)

    single = sample()
    again = sample()
    pooled = sample(threads=3)
    for other in (again, pooled):
        np.testing.assert_array_equal(single.states, other.states)
        np.testing.assert_array_equal(single.gammas, other.gammas)
        np.testing.assert_array_equal(single.inf_norms, other.inf_norms)
    different = run_paths(ScenarioRun(seed=2025, horizon=30, paths=40), mdp, channel,
                          JointPolicy.uniform(mdp, channel), plant)
    assert not np.array_equal(single.gammas, different.gammas)


def test_stabilizing_policy_converges(mdp, channel, stay_policy, zero_input_plant):
    run = ScenarioRun(seed=7, horizon=40, paths=100, s0="s1")
    stats = run_paths(run, mdp, channel, stay_policy, zero_input_plant)
    assert stats.max[-1] < 1e-3
    np.testing.assert_allclose(stats.visit_frequencies(), [1.0, 0.0, 0.0])


def test_deterministic_long_run_cost(mdp, channel, stay_policy):
    estimate = estimate_long_run_cost(ScenarioRun(seed=1, horizon=20, paths=10, s0="s1"), mdp, channel, stay_policy)
    assert estimate.mean == pytest.approx(5.0)
    assert estimate.standard_error == 0.0
    assert estimate.paths == 10


def test_long_run_cost_matches_analytic():
    mdp, channel = two_state_problem()
    policy = JointPolicy.uniform(mdp, channel)
    run = ScenarioRun(seed=99, horizon=200, paths=100)
    estimate = estimate_long_run_cost(run, mdp, channel, policy, burn_in=10)
    assert long_run_cost(mdp, channel, policy) == pytest.approx(4.75)
    assert abs(estimate.mean - 4.75) < 5.0 * estimate.standard_error + 1e-3


def test_divergent_paths_are_flagged(mdp, stay_policy):
    blow_up = CallableSwitchedPlant(1, lambda z, w: np.array([np.inf, 0.0]), lambda z, w: np.array([np.inf, 0.0]))
    run = ScenarioRun(seed=5, horizon=3, paths=2, x0=[1.0])
    stats = run_paths(run, mdp, forklift_channel(ZERO_THETA), stay_policy, blow_up)
    assert stats.flagged == [0, 1]
    assert np.all(np.isnan(stats.inf_norms[:, 1:]))
    assert stats.exit_frequency(10.0) == 1.0


def test_without_plant(mdp, channel, stay_policy):
    stats = run_paths(ScenarioRun(seed=0, horizon=5, paths=3), mdp, channel, stay_policy, None)
    assert np.all(np.isnan(stats.inf_norms))
    assert stats.costs.shape == (3, 5)


@pytest.mark.parametrize("changes", [
    {"seed": -1},
    {"horizon": 0},
    {"burn_in": 40},
    {"threads": 0},
    {"lambda_weight": 0.0},
    {"x0_scale": -1.0},
])
def test_run_validation(changes):
    with pytest.raises(ValidationError):
        ScenarioRun(**{"seed": 1, **changes})


def test_run_paths_validation(mdp, channel, stay_policy, plant):
    with pytest.raises(UnknownLabelError):
        run_paths(ScenarioRun(seed=1, s0="s9"), mdp, channel, stay_policy, plant)
    with pytest.raises(DimensionError):
        run_paths(ScenarioRun(seed=1, x0=[1.0]), mdp, channel, stay_policy, plant)
    with pytest.raises(DimensionError):
        run_paths(ScenarioRun(seed=1, lyapunov_matrix=np.eye(3)), mdp, channel, stay_policy, plant)
    with pytest.raises(ValidationError):
        run_paths(ScenarioRun(seed=1, disturbance_bound=0.5), mdp, channel, stay_policy, plant)
    with pytest.raises(ValidationError):
        estimate_long_run_cost(ScenarioRun(seed=1, horizon=5), mdp, channel, stay_policy, burn_in=5)


def test_visit_frequencies_match_stationary_distribution():
    # 每行转移分布相同，k >= 1 的状态独立同分布于该行
    row = np.array([0.5, 0.3, 0.2])
    states = ("s1", "s2", "s3")
    actions = tuple((f"a{i}", f"b{i}") for i in range(3))
    mdp = Mdp(states, actions, np.tile(row, (6, 1)), np.ones(6))
    channel = forklift_channel()
    stats = run_paths(ScenarioRun(seed=31, horizon=50, paths=200), mdp, channel,
                      JointPolicy.uniform(mdp, channel), None)
    samples = stats.states[:, 1:].size
    sigma = np.sqrt(row * (1.0 - row) / samples)
    assert np.all(np.abs(stats.visit_frequencies() - row) <= 3.0 * sigma)


def test_exit_frequency_small_under_asas(mdp, channel, stay_policy, plant, reference):
    assert check_asas(mdp, channel, stay_policy, reference).margin > 0.05
    x0 = np.array([1.0, -0.5])
    run = ScenarioRun(seed=17, horizon=40, paths=1000, x0=x0)
    stats = run_paths(run, mdp, channel, stay_policy, plant)
    assert stats.exit_frequency(float(np.max(np.abs(x0))), k_start=run.horizon // 2) < 0.05
