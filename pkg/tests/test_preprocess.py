"""Smoothing, differencing, scaling, window reshaping and the ADF test."""

import numpy as np
import pytest

from hybridcast.errors import DegenerateRangeError, LengthError
from hybridcast.preprocess import (
    adf_test,
    difference,
    fit_scaler,
    reshape_supervised,
    scale,
    smooth,
    smooth_series,
    undifference,
    unscale,
)


class TestSmooth:
    def test_matches_convolution_oracle(self):
        rng = np.random.default_rng(4)
        values = rng.uniform(10, 500, size=300)
        ours = smooth(values, 7)
        oracle = np.convolve(values, np.ones(7) / 7.0, mode="valid")
        np.testing.assert_allclose(ours, oracle, rtol=1e-12)

    def test_output_length(self):
        for n, tau in [(88, 7), (50, 3), (10, 10)]:
            assert smooth(np.ones(n), tau).size == n - tau + 1

    def test_constant_series_unchanged(self):
        np.testing.assert_allclose(smooth(np.full(40, 8.5), 7), 8.5)

    def test_too_short_rejected(self):
        with pytest.raises(LengthError):
            smooth(np.ones(5), 7)

    def test_series_dates_anchor_to_window_end(self, fixture_panel, smoothed_region):
        # a trailing window's value is dated by its most recent observation
        raw = fixture_panel.regions["Ashford"]
        assert smoothed_region.dates == raw.dates[6:]

    def test_smooth_series_keeps_region_name(self, fixture_panel):
        series = smooth_series(fixture_panel.regions["Harlow"], 7)
        assert series.region == "Harlow"
        assert len(series) == len(fixture_panel.regions["Harlow"]) - 6


class TestDifference:
    def test_first_difference_values(self):
        values = np.array([3.0, 5.0, 4.5, 10.0])
        np.testing.assert_array_equal(difference(values), [2.0, -0.5, 5.5])

    def test_roundtrip_with_undifference(self):
        rng = np.random.default_rng(9)
        values = rng.normal(100, 30, size=200)
        diffs = difference(values)
        rebuilt = [values[0]]
        for d in diffs:
            rebuilt.append(undifference(d, rebuilt[-1]))
        np.testing.assert_allclose(rebuilt, values, rtol=1e-12)

    def test_too_short(self):
        with pytest.raises(LengthError):
            difference(np.array([1.0]))


class TestScaler:
    def test_parameters_come_from_train_only(self):
        train = np.array([2.0, 8.0, 5.0])
        scaler = fit_scaler(train)
        assert scaler.mean == pytest.approx(5.0)
        assert scaler.spread == pytest.approx(6.0)

    def test_scale_unscale_roundtrip(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            train = rng.normal(0, rng.uniform(0.5, 50), size=60)
            scaler = fit_scaler(train)
            values = rng.normal(0, 20, size=40)
            np.testing.assert_allclose(unscale(scale(values, scaler), scaler), values, rtol=1e-12, atol=1e-9)

    def test_scaled_train_lands_in_unit_band(self):
        rng = np.random.default_rng(5)
        train = rng.uniform(-30, 90, size=100)
        scaled = scale(train, fit_scaler(train))
        assert scaled.max() - scaled.min() == pytest.approx(1.0)

    def test_degenerate_range_rejected(self):
        with pytest.raises(DegenerateRangeError):
            fit_scaler(np.full(10, 3.3))


class TestReshapeSupervised:
    def test_windows_are_oldest_first(self):
        data = reshape_supervised(np.array([1.0, 2.0, 3.0, 4.0]), lag=2)
        np.testing.assert_array_equal(data.inputs, [[1.0, 2.0], [2.0, 3.0]])
        np.testing.assert_array_equal(data.targets, [3.0, 4.0])

    def test_row_count_formula(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            n = int(rng.integers(9, 200))
            lag = int(rng.integers(1, min(n - 1, 12)))
            data = reshape_supervised(rng.normal(size=n), lag)
            assert data.rows == n - lag
            assert data.inputs.shape == (n - lag, lag)

    def test_too_short_rejected(self):
        with pytest.raises(LengthError):
            reshape_supervised(np.ones(7), lag=7)


class TestAdf:
    def test_white_noise_is_stationary(self):
        rng = np.random.default_rng(1)
        result = adf_test(rng.normal(size=400))
        assert result.stationary
        assert result.statistic < -2.86

    def test_random_walk_is_not_stationary(self):
        rng = np.random.default_rng(1)
        walk = np.cumsum(rng.normal(size=400))
        assert not adf_test(walk).stationary

    def test_differenced_walk_is_stationary_again(self):
        rng = np.random.default_rng(1)
        walk = np.cumsum(rng.normal(size=400))
        assert adf_test(difference(walk)).stationary

    def test_statistic_matches_statsmodels(self):
        statsmodels = pytest.importorskip("statsmodels.tsa.stattools")
        rng = np.random.default_rng(8)
        for values in (rng.normal(size=250), np.cumsum(rng.normal(size=250))):
            ours = adf_test(values)
            theirs = statsmodels.adfuller(values, maxlag=0, regression="c", autolag=None)
            np.testing.assert_allclose(ours.statistic, theirs[0], rtol=1e-8)

    def test_short_series_rejected(self):
        with pytest.raises(LengthError):
            adf_test(np.ones(10))
