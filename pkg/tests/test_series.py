import math

import numpy as np
import pytest

from fxrace.series import (
    MomentSummary,
    Panel,
    SeriesError,
    TimeSeries,
    acf,
    difference,
    log_transform,
    moments,
    near_zero_variance_filter,
    pacf,
    rank,
)


def make_series(values, name="s", start="2012-01-01"):
    idx = np.datetime64(start, "D") + np.arange(len(values))
    return TimeSeries(idx, values, name)


def make_panel(target_values, cov_values_by_name):
    target = make_series(target_values, "target")
    covs = [make_series(v, name) for name, v in cov_values_by_name.items()]
    return Panel(target, tuple(covs))


class TestTimeSeries:
    def test_valid_construction(self):
        s = make_series([1.0, 2.0, 3.0])
        assert len(s) == 3
        assert s.values.dtype == np.float64

    def test_gap_in_index_rejected(self):
        idx = np.array(["2012-01-01", "2012-01-02", "2012-01-04"], dtype="datetime64[D]")
        with pytest.raises(SeriesError, match="gap"):
            TimeSeries(idx, [1.0, 2.0, 3.0])

    def test_nan_value_rejected_with_date(self):
        with pytest.raises(SeriesError, match="2012-01-02"):
            make_series([1.0, math.nan, 3.0])

    def test_length_mismatch(self):
        idx = np.datetime64("2012-01-01") + np.arange(3)
        with pytest.raises(SeriesError, match="length"):
            TimeSeries(idx, [1.0, 2.0])

    def test_window_slice(self):
        s = make_series([1.0, 2.0, 3.0, 4.0])
        w = s.window(1, 3)
        assert list(w.values) == [2.0, 3.0]
        assert w.index[0] == np.datetime64("2012-01-02")


class TestPanel:
    def test_duplicate_covariate_names(self):
        with pytest.raises(SeriesError, match="duplicate"):
            make_panel([1.0, 2.0], {"a": [1.0, 2.0]}).with_covariates(
                [make_series([1.0, 2.0], "a"), make_series([3.0, 4.0], "a")]
            )

    def test_misaligned_covariate(self):
        target = make_series([1.0, 2.0, 3.0])
        cov = make_series([1.0, 2.0, 3.0], "c", start="2012-01-02")
        with pytest.raises(SeriesError, match="index"):
            Panel(target, (cov,))

    def test_T(self):
        panel = make_panel([1.0, 2.0, 3.0], {"a": [0.0, 1.0, 0.0]})
        assert panel.T == 3


class TestLogTransform:
    def test_ln_identities(self):
        s = make_series([1.0, math.e, math.e**2])
        out = log_transform(s)
        assert np.allclose(out.values, [0.0, 1.0, 2.0], atol=1e-15)

    def test_single_value(self):
        # oracle: high-precision natural log of 1.30
        out = log_transform(make_series([1.30, 1.30]))
        assert out.values[0] == pytest.approx(0.26236426446749106, abs=1e-15)

    def test_nonpositive_rejected_names_date(self):
        with pytest.raises(SeriesError, match="2012-01-01"):
            log_transform(make_series([0.0, 1.0]))

    def test_roundtrip_with_exp(self):
        rng = np.random.default_rng(1)
        vals = np.exp(rng.normal(size=50))
        s = make_series(vals)
        back = np.exp(log_transform(s).values)
        assert np.allclose(back, vals, rtol=1e-12)


class TestDifference:
    def test_first_differences(self):
        out = difference(make_series([1.0, 2.0, 4.0, 7.0]), 1)
        assert list(out.values) == [1.0, 2.0, 3.0]
        assert len(out.index) == 3

    def test_second_differences(self):
        out = difference(make_series([1.0, 2.0, 4.0, 7.0]), 2)
        assert list(out.values) == [1.0, 1.0]

    def test_identity(self):
        s = make_series([5.0, 6.0, 7.0])
        assert difference(s, 0) is s

    def test_too_short(self):
        with pytest.raises(SeriesError, match="short"):
            difference(make_series([1.0, 2.0]), 2)

    def test_twice_once_equals_order_two(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            s = make_series(rng.normal(size=rng.integers(3, 40)))
            a = difference(difference(s, 1), 1)
            b = difference(s, 2)
            assert np.array_equal(a.values, b.values)
            assert np.array_equal(a.index, b.index)


class TestNearZeroVariance:
    def test_constant_covariate_removed(self):
        panel = make_panel([1.0] * 20, {"z": [0.0] * 20, "ok": list(range(20))})
        filtered, removed = near_zero_variance_filter(panel)
        assert removed == ["z"]
        assert filtered.covariate_names == ["ok"]

    def test_single_nonzero_among_636_removed(self):
        vals = [0.0] * 636
        vals[100] = 5.0
        panel = make_panel([1.0] * 636, {"spike": vals})
        # oracle: ratio = 635/1 > 19, distinct pct = 2/636 = 0.31% < 10%
        _, removed = near_zero_variance_filter(panel, 19.0, 10.0)
        assert removed == ["spike"]

    def test_iid_noise_retained(self):
        rng = np.random.default_rng(3)
        panel = make_panel([1.0] * 636, {"noise": rng.normal(size=636)})
        filtered, removed = near_zero_variance_filter(panel)
        assert removed == []
        assert filtered.covariate_names == ["noise"]

    def test_target_never_removed(self):
        panel = make_panel([2.0] * 50, {"ok": list(range(50))})
        filtered, _ = near_zero_variance_filter(panel)
        assert filtered.target is panel.target

    def test_bad_cutoffs(self):
        panel = make_panel([1.0, 2.0], {"a": [0.0, 1.0]})
        with pytest.raises(SeriesError):
            near_zero_variance_filter(panel, -1.0, 10.0)


class TestMoments:
    def test_degenerate(self):
        m = moments([1.0, 1.0, 1.0, 1.0])
        assert m.mean == 1.0
        assert m.variance == 0.0
        assert math.isnan(m.skewness) and math.isnan(m.kurtosis)

    def test_alternating_hand_computed(self):
        m = moments([-1.0, 1.0, -1.0, 1.0])
        assert m == MomentSummary(0.0, 1.0, 0.0, 1.0)

    def test_standard_normal_monte_carlo(self):
        x = np.random.default_rng(42).normal(size=100_000)
        m = moments(x)
        assert abs(m.skewness) < 0.05
        assert abs(m.kurtosis - 3.0) < 0.1

    def test_zscored_series(self):
        rng = np.random.default_rng(5)
        x = rng.gamma(2.0, size=400)
        z = (x - x.mean()) / x.std()
        m = moments(z)
        assert abs(m.mean) < 1e-10
        assert abs(m.variance - 1.0) < 1e-10

    def test_too_short(self):
        with pytest.raises(SeriesError):
            moments([1.0, 2.0, 3.0])


class TestAcfPacf:
    def test_alternating_series_lag1(self):
        x = np.tile([1.0, -1.0], 50)
        vals, band = acf(x, 1)
        # oracle: direct formula on the constructed series gives -(n-1)/n
        assert vals[0] == pytest.approx(-0.99, abs=1e-12)
        assert band == pytest.approx(1.96 / 10.0)

    def test_iid_noise_band_coverage(self):
        rng = np.random.default_rng(9)
        inside = []
        for _ in range(50):
            vals, band = acf(rng.normal(size=1000), 20)
            inside.append(np.mean(np.abs(vals) < band))
        assert np.mean(inside) >= 0.93

    def test_ar1_simulated(self):
        rng = np.random.default_rng(11)
        n = 2000
        x = np.empty(n)
        x[0] = rng.normal()
        for t in range(1, n):
            x[t] = 0.8 * x[t - 1] + rng.normal()
        vals, _ = acf(x, 1)
        assert vals[0] == pytest.approx(0.8, abs=0.05)

    def test_values_batched_in_unit_interval(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            x = rng.normal(size=rng.integers(30, 200))
            vals, _ = acf(x, 10)
            assert np.all(np.abs(vals) <= 1.0)

    def test_pacf_lag1_equals_acf_lag1(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            x = rng.normal(size=100).cumsum()
            a, _ = acf(x, 5)
            p, _ = pacf(x, 5)
            assert p[0] == a[0]

    def test_constant_series_rejected(self):
        with pytest.raises(SeriesError, match="constant"):
            acf([2.0] * 50, 3)

    def test_brute_force_oracle(self):
        # independent direct-formula implementation
        rng = np.random.default_rng(17)
        x = rng.normal(size=120)
        xm = x - x.mean()
        expected = []
        for lag in range(1, 11):
            num = sum(xm[t] * xm[t - lag] for t in range(lag, len(x)))
            den = sum(v * v for v in xm)
            expected.append(num / den)
        vals, _ = acf(x, 10)
        assert np.allclose(vals, expected, atol=1e-12)


class TestRank:
    def test_basic_ascending(self):
        assert rank([3.0, 1.0, 2.0], "asc") == [3, 1, 2]

    def test_ties_take_minimum_rank(self):
        assert rank([5.0, 5.0, 1.0], "asc") == [2, 2, 1]

    def test_descending(self):
        assert rank([3.0, 1.0, 2.0], "desc") == [1, 3, 2]

    def test_nan_rejected(self):
        with pytest.raises(SeriesError):
            rank([1.0, math.nan])

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(19)
        for _ in range(20):
            x = rng.normal(size=15)
            assert rank(x, "asc") == rank(np.exp(x), "asc")
            assert rank(x, "desc") == rank(x**3, "desc")

    def test_paper_style_predictability_ranks(self):
        # 18 scores where 'risk' is the most predictive (lowest) and 'Euro'
        # the worst among the named concepts; the noise entry sits 4th.
        names = ["bank", "banking", "banks", "debt", "ECB", "economy", "Euro",
                 "Germany", "Greece", "Greek", "Hollande", "Italian", "Italy",
                 "Moodys", "risk", "SP", "Spain", "Rand"]
        scores = [5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 99.0, 11.0, 12.0, 13.0,
                  14.0, 4.0, 2.0, 15.0, -10.0, 3.0, 16.0, 3.5]
        ranks = dict(zip(names, rank(scores, "asc")))
        assert ranks["risk"] == 1
        assert ranks["Rand"] == 4
        named = [n for n in names if n != "Rand"]
        named_ranks = dict(zip(named, rank([scores[names.index(n)] for n in named], "asc")))
        assert named_ranks["Euro"] == 17
