import numpy as np
import pytest

from sddc.exceptions import DimensionError, ValidationError
from sddc.model.plant import (
    DC_MOTOR_F,
    CallableSwitchedPlant,
    LinearSwitchedPlant,
    simulate_trajectory,
    spectral_radius,
    step,
)


def test_dc_motor_matrices(plant):
    F0, F1 = plant.mode_matrices()
    np.testing.assert_array_equal(F0, np.array(DC_MOTOR_F))
    np.testing.assert_allclose(F1, F0 + plant.G @ plant.K)
    assert plant.T == 0.3
    assert spectral_radius(F1) < 0.2
    assert spectral_radius(F0) > 1.0


def test_delivered_step_uses_fresh_state(plant):
    x = np.array([1.0, -2.0])
    z = step(plant, np.concatenate([x, [5.0, 5.0]]), 1)
    np.testing.assert_allclose(z[:2], plant.closed_loop @ x)
    np.testing.assert_array_equal(z[2:], x)


def test_dropped_step_holds_estimate(plant):
    x, held = np.array([1.0, -2.0]), np.array([0.5, 0.25])
    z = step(plant, np.concatenate([x, held]), 0)
    np.testing.assert_allclose(z[:2], plant.F @ x + plant.G @ plant.K @ held)
    np.testing.assert_array_equal(z[2:], held)


def test_zero_input_mode(zero_input_plant):
    x = np.array([1.0, -2.0])
    z = step(zero_input_plant, np.concatenate([x, np.zeros(2)]), 0)
    np.testing.assert_allclose(z[:2], zero_input_plant.F @ x)
    z = step(zero_input_plant, np.concatenate([x, np.zeros(2)]), 1)
    np.testing.assert_allclose(z[:2], zero_input_plant.closed_loop @ x)


def test_disturbance_bound_enforced():
    plant = LinearSwitchedPlant(np.array(DC_MOTOR_F), [[2.27], [7.6897]], [[-0.4055, -0.0024]],
                                disturbance_bound=0.1)
    z = np.zeros(4)
    out = step(plant, z, 1, np.array([0.1, -0.05]))
    np.testing.assert_allclose(out[:2], [0.1, -0.05])
    with pytest.raises(ValidationError):
        step(plant, z, 1, np.array([0.2, 0.0]))


def test_invalid_gamma(plant):
    with pytest.raises(ValidationError):
        step(plant, np.zeros(4), 2)


def test_augmented_state_shape(plant):
    with pytest.raises(DimensionError):
        step(plant, np.zeros(3), 1)
    with pytest.raises(ValidationError):
        step(plant, np.array([np.nan, 0.0, 0.0, 0.0]), 1)


def test_unstable_closed_loop_rejected():
    with pytest.raises(ValidationError):
        LinearSwitchedPlant(np.eye(2) * 2.0, np.zeros((2, 1)), np.zeros((1, 2)))


def test_unknown_drop_mode(plant):
    with pytest.raises(ValidationError):
        plant.with_options(drop_mode="hold")


def test_mapping_roundtrip(plant):
    rebuilt = LinearSwitchedPlant.from_mapping(plant.to_mapping())
    np.testing.assert_array_equal(rebuilt.closed_loop, plant.closed_loop)
    assert rebuilt.drop_mode == plant.drop_mode


def test_simulate_trajectory_all_delivered(plant):
    x0 = np.array([0.3, -0.1])
    trajectory = simulate_trajectory(plant, x0, [1] * 5, states=["s1"] * 5, levels=["H"] * 5, costs=[5.0] * 5)
    expected = np.linalg.matrix_power(plant.closed_loop, 5) @ x0
    np.testing.assert_allclose(trajectory.final_state, expected, rtol=1e-12, atol=1e-15)
    frame = trajectory.to_frame()
    assert list(frame.columns) == ["k", "x1", "x2", "xhat1", "xhat2", "gamma", "s", "p", "cost"]
    assert len(frame) == 6
    assert frame["gamma"].isna().iloc[-1]


def test_simulate_trajectory_with_drops(plant):
    x0 = np.array([0.3, -0.1])
    trajectory = simulate_trajectory(plant, x0, [1, 0, 0])
    x1 = plant.closed_loop @ x0
    x2 = plant.F @ x1 + plant.G @ plant.K @ x0
    x3 = plant.F @ x2 + plant.G @ plant.K @ x0
    np.testing.assert_allclose(trajectory.states(), np.vstack([x0, x1, x2, x3]))
    np.testing.assert_allclose(trajectory.u[1], plant.K @ x0)


def test_callable_plant():
    def f0(z, w):
        return np.concatenate([1.1 * z[:1] + w, z[1:]])

    def f1(z, w):
        return np.concatenate([0.5 * z[:1] + w, z[:1]])

    plant = CallableSwitchedPlant(1, f0, f1, disturbance_bound=0.0)
    z = step(plant, np.array([2.0, 0.0]), 1)
    np.testing.assert_allclose(z, [1.0, 2.0])
    z = step(plant, z, 0)
    np.testing.assert_allclose(z, [1.1, 2.0])


def test_callable_plant_non_finite():
    plant = CallableSwitchedPlant(1, lambda z, w: np.array([np.inf, 0.0]), lambda z, w: z)
    with pytest.raises(ValidationError):
        step(plant, np.zeros(2), 0)
