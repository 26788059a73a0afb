from __future__ import annotations

import math

import numpy as np
import pytest

from app.mobility.distributions import (
    CcdfCurve,
    CountHistogram,
    ccdf,
    community_visit_counts,
    empirical_ccdf,
    fit_loglog,
    user_visit_counts,
)


def _brute_force_ccdf(values):
    n = len(values)
    return [(v, sum(1 for x in values if x >= v) / n) for v in sorted(set(values))]


def test_ccdf_small_histogram():
    curve = ccdf(CountHistogram(entries={"a": 1, "b": 1, "c": 2, "d": 4}))
    assert curve.points == [(1, 1.0), (2, 0.5), (4, 0.25)]


def test_ccdf_matches_enumeration_on_random_histograms():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n_keys = int(rng.integers(1, 300))
        counts = rng.integers(1, 50, size=n_keys).tolist()
        curve = ccdf(CountHistogram(entries={f"k{i}": c for i, c in enumerate(counts)}))
        assert curve.points == _brute_force_ccdf(counts)
        assert curve.points[0][1] == 1.0


def test_histogram_drops_zero_counts_and_rejects_negative():
    assert len(CountHistogram(entries={"a": 0, "b": 3})) == 1
    with pytest.raises(ValueError):
        CountHistogram(entries={"a": -1})
    with pytest.raises(ValueError):
        ccdf(CountHistogram())


def test_ccdf_curve_invariants():
    with pytest.raises(ValueError):
        CcdfCurve(points=[(1, 0.5)])
    with pytest.raises(ValueError):
        CcdfCurve(points=[(2, 1.0), (1, 0.5)])


def test_visit_counts(make_trajectory):
    trajectories = [
        make_trajectory("u1", [("a", 1), ("b", 2), ("a", 3)]),
        make_trajectory("u2", [("a", 4)]),
    ]
    assert community_visit_counts(trajectories).entries == {"a": 3, "b": 1}
    assert user_visit_counts(trajectories).entries == {"u1": 3, "u2": 1}


def test_empirical_ccdf_of_real_values():
    assert empirical_ccdf([0.5, 0.5, 1.5]) == [(0.5, 1.0), (1.5, 1 / 3)]
    with pytest.raises(ValueError):
        empirical_ccdf([])


def test_fit_recovers_exact_power_law():
    points = [(x, 10.0 * x ** -2.0) for x in range(1, 11)]
    fit = fit_loglog(points)
    assert fit.exponent == pytest.approx(-2.0, abs=1e-9)
    assert fit.intercept == pytest.approx(1.0, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.n_points == 10


def test_fit_range_is_inclusive():
    points = [(x, x ** -1.5) for x in range(1, 21)]
    fit = fit_loglog(points, (5, 10))
    assert fit.n_points == 6
    assert fit.fit_range == (5.0, 10.0)
    assert fit.exponent == pytest.approx(-1.5, abs=1e-9)


def test_fit_needs_three_positive_points():
    with pytest.raises(ValueError, match="at least 3"):
        fit_loglog([(1, 1.0), (2, 0.5), (3, 0.0)])
    with pytest.raises(ValueError):
        fit_loglog([(1, 1.0), (2, 0.5), (4, 0.25)], (3, 10))


def test_flat_series_fits_with_zero_slope():
    fit = fit_loglog([(x, 0.5) for x in (1, 2, 4, 8)])
    assert fit.exponent == pytest.approx(0.0, abs=1e-12)
    assert math.isclose(fit.r_squared, 1.0)
