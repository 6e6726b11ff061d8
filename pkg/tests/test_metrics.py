from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ecgsr.errors import MetricError
from ecgsr.metrics import (
    MetricRow,
    metric_row,
    mse_metric,
    psnr_metric,
    rmse_metric,
    rmse_percent,
    rows_from_csv,
    rows_to_csv,
    snr_metric,
    ssim_metric,
)
from oracles import ssim_loops

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False, allow_subnormal=False)
pairs_12 = st.integers(11, 40).flatmap(
    lambda n: st.tuples(arrays(np.float64, (12, n), elements=finite), arrays(np.float64, (12, n), elements=finite)))


class TestMse:
    def test_identity(self, rng):
        x = rng.normal(size=(12, 50))
        assert mse_metric(x, x) == 0 and rmse_metric(x, x) == 0

    def test_hand_case(self):
        assert mse_metric([1, 2, 3], [1, 2, 5]) == pytest.approx(4 / 3, abs=1e-15)
        assert rmse_metric([1, 2, 3], [1, 2, 5]) == pytest.approx(math.sqrt(4 / 3), abs=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(MetricError) as e:
            mse_metric(np.zeros((12, 5)), np.zeros((12, 6)))
        assert e.value.code == "SHAPE_MISMATCH"

    @settings(max_examples=50, deadline=None)
    @given(pairs_12)
    def test_rmse_squared(self, xy):
        x, y = xy
        assert abs(rmse_metric(x, y) ** 2 - mse_metric(x, y)) <= 1e-12 * max(1.0, mse_metric(x, y))

    def test_quadratic_scaling(self, rng):
        x, y = rng.normal(size=(2, 12, 30))
        assert mse_metric(3 * x, 3 * y) == pytest.approx(9 * mse_metric(x, y), rel=1e-12)

    def test_rmse_percent(self):
        y = np.array([[0.0, 2.0, 0.0, 2.0]])
        x = y + 0.2
        assert rmse_percent(x, y) == pytest.approx(10.0)
        with pytest.raises(MetricError):
            rmse_percent(y, np.ones_like(y))


class TestSsim:
    def test_self_similarity(self, rng):
        x = rng.normal(size=(12, 60))
        assert ssim_metric(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_negation_is_negative(self):
        # period equal to the window, so every window is zero-mean
        x = np.tile(np.sin(2 * np.pi * np.arange(66) / 11), (12, 1))
        assert ssim_metric(x, -x) < 0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_windowed_definition(self, seed):
        r = np.random.default_rng(seed)
        x, y = r.normal(size=(3, 30)), r.normal(size=(3, 30))
        assert abs(ssim_metric(x, y) - ssim_loops(x, y)) <= 1e-12

    def test_too_short(self):
        with pytest.raises(MetricError) as e:
            ssim_metric(np.zeros((12, 10)), np.zeros((12, 10)))
        assert e.value.code == "TOO_SHORT"

    @pytest.mark.parametrize("sx,sy", [(1.0, 1.5e-250), (1e-136, 1e-136), (1e150, 1e150), (1e10, 1e-300)])
    def test_extreme_magnitudes_stay_finite(self, sx, sy, rng):
        x, y = sx * rng.normal(size=(2, 40)), sy * rng.normal(size=(2, 40))
        v = ssim_metric(x, y)
        assert np.isfinite(v) and -1 - 1e-12 <= v <= 1 + 1e-12
        if sx == sy:
            assert v == pytest.approx(ssim_loops(x / sx, y / sy), abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(pairs_12)
    def test_bounded(self, xy):
        assert ssim_metric(*xy) <= 1 + 1e-12


class TestSnrPsnr:
    def test_zero_db(self):
        assert snr_metric([1, 1, 1, 1], [0, 0, 0, 0]) == 0.0

    def test_sentinels(self, rng):
        x = rng.normal(size=(12, 20))
        assert snr_metric(x, x) == math.inf
        assert snr_metric(np.zeros_like(x), x) == -math.inf
        assert psnr_metric(x, x) == math.inf

    def test_reference_convention(self):
        x, y = np.array([2.0, 2.0]), np.array([1.0, 1.0])
        assert snr_metric(x, y) == pytest.approx(10 * math.log10(4))
        assert snr_metric(x, y, convention="reference") == pytest.approx(0.0)
        with pytest.raises(MetricError) as e:
            snr_metric(x, y, convention="other")
        assert e.value.code == "BAD_CONVENTION"

    def test_psnr_20db(self):
        x = np.array([1.0, 0.0, 0.0, 0.0])
        y = x - 0.1  # mse 0.01, max(x) 1
        assert psnr_metric(x, y) == pytest.approx(20.0, abs=1e-12)

    def test_nonpositive_peak(self):
        with pytest.raises(MetricError) as e:
            psnr_metric(-np.ones(4), np.zeros(4))
        assert e.value.code == "NONPOSITIVE_PEAK"

    @settings(max_examples=50, deadline=None)
    @given(pairs_12)
    def test_psnr_identity(self, xy):
        x, y = xy
        m, peak = mse_metric(x, y), x.max()
        if m == 0 or peak <= 0:
            return
        lhs = psnr_metric(x, y) - 20 * math.log10(peak) + 10 * math.log10(m)
        assert abs(lhs) <= 1e-12


class TestPermutation:
    @settings(max_examples=30, deadline=None)
    @given(pairs_12, st.randoms(use_true_random=False))
    def test_lead_permutation(self, xy, rnd):
        x, y = xy
        perm = list(range(12))
        rnd.shuffle(perm)
        a = metric_row(x, y, "w", None, "m", "c")
        b = metric_row(x[perm], y[perm], "w", None, "m", "c")
        for k, v in a.values().items():
            w = b.values()[k]
            if math.isnan(v):
                assert math.isnan(w)
            elif math.isinf(v):
                assert v == w
            else:
                assert w == pytest.approx(v, rel=1e-12, abs=1e-12), k


class TestRows:
    def test_row_invariants(self, rng):
        x, y = rng.normal(size=(2, 12, 40))
        r = metric_row(x, y, "w0", "MI", "cubic", "test")
        assert r.rmse ** 2 == pytest.approx(r.mse, rel=1e-12) and r.ssim <= 1

    def test_nonpositive_peak_row_is_nan(self):
        r = metric_row(-np.ones((12, 20)), np.zeros((12, 20)), "w", None, "m", "c")
        assert math.isnan(r.psnr_db)

    def test_csv_round_trip(self, rng):
        x, y = rng.normal(size=(2, 12, 40))
        rows = [metric_row(x, y, "w0", "MI", "cubic", "test"), metric_row(x, x, "w1", None, "dcae-sr", "p=0.5")]
        back = rows_from_csv(rows_to_csv(rows))
        assert back == rows
        assert isinstance(back[0], MetricRow)
