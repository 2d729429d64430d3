import numpy as np
import pytest

from sddc.simulation.statistics import StatisticsCalculator


def test_basic_stats_skip_non_finite():
    stats = StatisticsCalculator.calculate_basic_stats(np.array([1.0, np.nan, 3.0, np.inf]))
    assert stats == {"min": 1.0, "max": 3.0, "mean": 2.0, "median": 2.0, "std": 1.0, "count": 2}


def test_basic_stats_empty():
    stats = StatisticsCalculator.calculate_basic_stats(np.array([]))
    assert stats["count"] == 0
    assert stats["mean"] is None


def test_standard_error():
    assert StatisticsCalculator.standard_error(np.array([5.0])) == 0.0
    values = np.array([1.0, 2.0, 3.0, 4.0])
    assert StatisticsCalculator.standard_error(values) == pytest.approx(np.std(values, ddof=1) / 2.0)


def test_binomial_band():
    low, high = StatisticsCalculator.binomial_band(0.9, 10 ** 6)
    assert low == pytest.approx(0.9 - 0.0009)
    assert high == pytest.approx(0.9 + 0.0009)
    assert StatisticsCalculator.binomial_band(0.0, 10) == (0.0, 0.0)
    assert StatisticsCalculator.binomial_band(0.99, 1)[1] == 1.0
    with pytest.raises(ValueError):
        StatisticsCalculator.binomial_band(0.5, 0)


def test_containment_fraction():
    assert StatisticsCalculator.containment_fraction([1.0, 2.0, 5.0, 1.0], [1.0, 3.0, 4.0, 2.0]) == 0.75
    assert StatisticsCalculator.containment_fraction([], []) == 1.0
    with pytest.raises(ValueError):
        StatisticsCalculator.containment_fraction([1.0], [1.0, 2.0])
