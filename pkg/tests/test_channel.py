import math

import numpy as np
import pytest

from sddc.cli.presets import FORKLIFT_STATES, forklift_channel
from sddc.exceptions import UnknownLabelError, ValidationError
from sddc.model.channel import PowerChannel, dropout_probability, sample_gamma
from sddc.simulation.rng import generator

LEVELS = {"L": 1.0, "H": 2.0}
COST = {"L": 1.0, "H": 4.0}


def table(s1=(0.9, 0.4), s2=(0.5, 0.3), s3=(0.4, 0.2)):
    return {s: dict(zip(("L", "H"), row)) for s, row in zip(FORKLIFT_STATES, (s1, s2, s3))}


def test_forklift_table(channel):
    assert channel.levels == ("L", "H")
    assert channel.dropout_probability("s1", "L") == 0.9
    assert channel.dropout_probability("s3", "H") == 0.2
    assert dropout_probability(channel, 1, 1) == 0.3
    np.testing.assert_allclose(channel.theta_vector(), [0.9, 0.4, 0.5, 0.3, 0.4, 0.2])
    np.testing.assert_allclose(channel.power_cost, [[1.0, 4.0]] * 3)


def test_levels_sorted_by_power():
    channel = PowerChannel.from_table(FORKLIFT_STATES, {"H": 2.0, "L": 1.0}, table(), COST)
    assert channel.levels == ("L", "H")
    np.testing.assert_allclose(channel.power_values, [1.0, 2.0])


def test_rising_dropout_rejected():
    with pytest.raises(ValidationError) as info:
        PowerChannel.from_table(FORKLIFT_STATES, LEVELS, table(s2=(0.3, 0.5)), COST)
    assert info.value.details["state"] == "s2"
    assert info.value.details["level"] == "H"


@pytest.mark.parametrize("bad", [-0.1, 1.0, 1.5, math.nan])
def test_dropout_outside_unit_interval(bad):
    with pytest.raises(ValidationError):
        PowerChannel.from_table(FORKLIFT_STATES, LEVELS, table(s1=(bad, 0.0)), COST)


def test_certain_loss_only_when_allowed():
    channel = forklift_channel({("s1", "L"): 1.0}, allow_certain_loss=True)
    assert channel.dropout_probability("s1", "L") == 1.0
    with pytest.raises(ValidationError):
        forklift_channel({("s1", "L"): 1.0})


def test_incomplete_table():
    partial = table()
    del partial["s3"]
    with pytest.raises(ValidationError):
        PowerChannel.from_table(FORKLIFT_STATES, LEVELS, partial, COST)


def test_negative_power_cost():
    with pytest.raises(ValidationError):
        PowerChannel.from_table(FORKLIFT_STATES, LEVELS, table(), {"L": -1.0, "H": 4.0})


def test_per_state_power_cost():
    cost = {s: {"L": 1.0 + i, "H": 4.0 + i} for i, s in enumerate(FORKLIFT_STATES)}
    channel = PowerChannel.from_table(FORKLIFT_STATES, LEVELS, table(), cost)
    np.testing.assert_allclose(channel.power_cost[:, 1], [4.0, 5.0, 6.0])


def test_unknown_labels(channel):
    with pytest.raises(UnknownLabelError):
        channel.dropout_probability("s4", "L")
    with pytest.raises(UnknownLabelError):
        channel.dropout_probability("s1", "M")
    with pytest.raises(UnknownLabelError):
        channel.level_index(2)


def test_rayleigh_outage_formula_and_monotonicity():
    kappa = {"s1": 0.5, "s2": 1.0, "s3": 2.0}
    levels = {"L": 1.0, "M": 2.0, "H": 4.0}
    channel = PowerChannel.from_rayleigh(FORKLIFT_STATES, levels, 1.0, kappa, 1.0, {**COST, "M": 2.0})
    expected = 1.0 - math.exp(-1.0 / (2.0 * 2.0 * 0.5 ** 2))
    assert channel.dropout_probability("s1", "M") == pytest.approx(expected)
    assert channel.mode == "rayleigh"
    assert np.all(np.diff(channel.dropout, axis=1) < 0)
    assert np.all(np.diff(channel.dropout, axis=0) < 0)


def test_rayleigh_rejects_non_positive_kappa():
    with pytest.raises(ValidationError):
        PowerChannel.from_rayleigh(FORKLIFT_STATES, LEVELS, 1.0, {"s1": 0.0, "s2": 1.0, "s3": 1.0}, 1.0, COST)


def test_with_dropout_revalidates(channel):
    changed = channel.with_dropout("s1", "L", 0.65)
    assert changed.dropout_probability("s1", "L") == 0.65
    assert channel.dropout_probability("s1", "L") == 0.9
    with pytest.raises(ValidationError):
        channel.with_dropout("s1", "L", 0.3)


def test_mapping_roundtrip(channel):
    data = channel.to_mapping()
    rebuilt = PowerChannel.from_table(FORKLIFT_STATES, data["levels"], data["dropout_table"], data["power_cost"])
    np.testing.assert_array_equal(rebuilt.dropout, channel.dropout)


def test_sample_gamma_frequency(channel):
    rng = generator(11)
    draws = np.array([sample_gamma(channel, "s2", "L", rng) for _ in range(20_000)])
    assert set(np.unique(draws)) <= {0, 1}
    assert np.mean(draws == 0) == pytest.approx(0.5, abs=0.03)


def test_sample_gamma_never_drops_at_zero():
    channel = forklift_channel({("s3", "L"): 0.0, ("s3", "H"): 0.0})
    rng = generator(3)
    assert all(channel.sample_gamma("s3", "H", rng) == 1 for _ in range(200))
