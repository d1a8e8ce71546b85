import math

import numpy as np
import pytest

from fxrace.diagnostics import (
    BatteryConfig,
    DiagnosticError,
    TestResult,
    adf,
    bonferroni_adjust,
    breusch_pagan,
    kpss,
    ljung_box,
    phillips_perron,
    qq_data,
    run_battery,
    vif,
    white_nn_test,
)
from fxrace.series import TimeSeries


def ar1(rng, n, phi=0.5, sd=1.0):
    e = rng.normal(0.0, sd, size=n)
    x = np.empty(n)
    x[0] = e[0] / math.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


def make_ts(values):
    idx = np.datetime64("2012-01-01") + np.arange(len(values))
    return TimeSeries(idx, values)


class TestLjungBox:
    def test_hand_series_formula_oracle(self):
        x = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
        n = len(x)
        xm = x - x.mean()
        r1 = (xm[1:] @ xm[:-1]) / (xm @ xm)
        expected_q = n * (n + 2.0) * r1**2 / (n - 1)
        res = ljung_box(x, n_lags=1)
        assert res.statistic == pytest.approx(expected_q, rel=1e-12)
        assert res.p_value < 0.05

    def test_size_on_iid_normal(self):
        rng = np.random.default_rng(2024)
        rej = sum(
            ljung_box(rng.normal(size=500), n_lags=10).p_value < 0.05
            for _ in range(2000)
        )
        assert 0.03 <= rej / 2000 <= 0.07

    def test_power_on_ar1(self):
        rng = np.random.default_rng(7)
        rej = sum(
            ljung_box(ar1(rng, 500, phi=0.8)).p_value < 0.01 for _ in range(200)
        )
        assert rej / 200 >= 0.99

    def test_affine_invariance(self):
        rng = np.random.default_rng(8)
        x = ar1(rng, 300, phi=0.3)
        a = ljung_box(x).statistic
        b = ljung_box(5.0 * x - 2.0).statistic
        assert a == pytest.approx(b, rel=1e-10)

    def test_constant_rejected(self):
        with pytest.raises(Exception):
            ljung_box(np.ones(100))

    def test_df_reduction(self):
        x = ar1(np.random.default_rng(9), 400)
        full = ljung_box(x, n_lags=10, fitted_params=0)
        reduced = ljung_box(x, n_lags=10, fitted_params=3)
        assert full.statistic == reduced.statistic
        assert reduced.p_value <= full.p_value  # fewer df, same Q


class TestKpss:
    def test_stationary_ar1_mostly_clamped_high(self):
        rng = np.random.default_rng(31)
        ps = [kpss(ar1(rng, 500, phi=0.5)).p_value for _ in range(200)]
        # non-rejection hits the 0.10 clamp; see decisions ledger for the rate
        assert np.mean([p == 0.10 for p in ps]) >= 0.85
        assert all(0.01 <= p <= 0.10 for p in ps)

    def test_random_walk_mostly_clamped_low(self):
        rng = np.random.default_rng(32)
        ps = [kpss(rng.normal(size=500).cumsum()).p_value for _ in range(200)]
        assert np.mean([p == 0.01 for p in ps]) >= 0.80
        assert np.mean([p <= 0.05 for p in ps]) >= 0.90

    def test_length_check(self):
        with pytest.raises(DiagnosticError):
            kpss(np.arange(10.0))

    def test_constant(self):
        with pytest.raises(DiagnosticError):
            kpss(np.zeros(100))


class TestUnitRoot:
    def test_adf_random_walk_rarely_rejects(self):
        rng = np.random.default_rng(41)
        ps = [adf(rng.normal(size=500).cumsum()).p_value for _ in range(200)]
        assert np.mean([p > 0.10 for p in ps]) >= 0.90

    def test_adf_white_noise_rejects(self):
        rng = np.random.default_rng(42)
        ps = [adf(rng.normal(size=500)).p_value for _ in range(200)]
        assert np.mean([p < 0.05 for p in ps]) >= 0.95

    def test_adf_p_clamped(self):
        rng = np.random.default_rng(43)
        p = adf(rng.normal(size=500)).p_value
        assert p == 0.01  # overwhelming rejection hits the table edge
        trend = np.arange(500.0) + rng.normal(size=500) * 1e-6
        assert 0.01 <= adf(trend).p_value <= 0.99

    def test_adf_aic_policy(self):
        rng = np.random.default_rng(44)
        x = rng.normal(size=300)
        res = adf(x, lag_policy="aic")
        assert res.lags_or_df <= int(299 ** (1 / 3))
        with pytest.raises(DiagnosticError):
            adf(x, lag_policy="bogus")

    def test_pp_and_adf_agree_on_classification(self):
        rng = np.random.default_rng(45)
        agree = 0
        total = 0
        for _ in range(100):
            wn = rng.normal(size=500)
            walk = rng.normal(size=500).cumsum()
            for series, is_stationary in ((wn, True), (walk, False)):
                a = adf(series).p_value < 0.05
                p = phillips_perron(series).p_value < 0.05
                agree += a == p
                total += 1
        assert agree / total >= 0.85

    def test_pp_white_noise_rejects(self):
        rng = np.random.default_rng(46)
        ps = [phillips_perron(rng.normal(size=500)).p_value for _ in range(200)]
        assert np.mean([p < 0.05 for p in ps]) >= 0.95


class TestWhiteNN:
    def test_size_on_linear_ar1(self):
        rng = np.random.default_rng(51)
        rej = sum(
            white_nn_test(ar1(rng, 500), seed=i).p_value < 0.05 for i in range(1000)
        )
        assert 0.02 <= rej / 1000 <= 0.09

    def test_power_on_quadratic_recursion(self):
        rng = np.random.default_rng(52)
        rej = 0
        for i in range(200):
            y = np.empty(500)
            y[0] = -0.3
            e = rng.normal(0.0, 0.2, size=500)
            for t in range(1, 500):
                y[t] = 0.8 * y[t - 1] ** 2 - 0.4 + e[t]
            rej += white_nn_test(y, seed=i).p_value < 0.05
        assert rej / 200 >= 0.80

    def test_deterministic_given_seed(self):
        x = ar1(np.random.default_rng(53), 300)
        a = white_nn_test(x, n_hidden=2, seed=99)
        b = white_nn_test(x, n_hidden=2, seed=99)
        assert (a.statistic, a.p_value) == (b.statistic, b.p_value)
        c = white_nn_test(x, n_hidden=2, seed=100)
        assert c.statistic != a.statistic

    def test_length_check(self):
        with pytest.raises(DiagnosticError):
            white_nn_test(np.arange(30.0))


class TestBreuschPagan:
    def test_size(self):
        rng = np.random.default_rng(61)
        rej = sum(breusch_pagan(rng.normal(size=500)).p_value < 0.05 for _ in range(1000))
        assert abs(rej / 1000 - 0.05) <= 0.03

    def test_power_variance_in_t(self):
        rng = np.random.default_rng(62)
        rej = 0
        for _ in range(200):
            t = np.arange(500) / 500.0
            x = rng.normal(size=500) * np.sqrt(0.2 + 2.0 * t)
            rej += breusch_pagan(x).p_value < 0.05
        assert rej / 200 >= 0.90

    def test_constant_rejected(self):
        with pytest.raises(DiagnosticError):
            breusch_pagan(np.full(100, 3.0))

    def test_works_on_time_series_input(self):
        res = breusch_pagan(make_ts(np.random.default_rng(63).normal(size=100)))
        assert isinstance(res, TestResult)


class TestVif:
    def test_independent_noise_near_one(self):
        rng = np.random.default_rng(71)
        covs = [make_ts(rng.normal(size=1000)), make_ts(rng.normal(size=1000))]
        out = vif(covs)
        assert all(abs(v - 1.0) <= 0.1 for v in out)

    def test_perfect_collinearity_sentinel(self):
        x = np.random.default_rng(72).normal(size=200)
        out = vif([make_ts(x), make_ts(2.0 * x)])
        assert all(math.isinf(v) for v in out)

    def test_near_collinear_large(self):
        rng = np.random.default_rng(73)
        x = rng.normal(size=500)
        y = x + rng.normal(size=500) * 0.05
        out = vif([make_ts(x), make_ts(y)])
        assert all(v > 10.0 for v in out)

    def test_orthogonal_exact(self):
        # constructed exactly orthogonal, mean-zero regressors
        a = np.array([1.0, 1.0, -1.0, -1.0] * 25)
        b = np.array([1.0, -1.0, 1.0, -1.0] * 25)
        out = vif([make_ts(a), make_ts(b)])
        assert all(abs(v - 1.0) < 1e-8 for v in out)

    def test_needs_two(self):
        with pytest.raises(DiagnosticError):
            vif([make_ts(np.arange(50.0))])


class TestBonferroni:
    def test_paper_row_values(self):
        assert bonferroni_adjust([0.554], 32)[0] == 1.0
        # the formula applied to the rounded displayed raw value
        assert bonferroni_adjust([0.004], 32)[0] == pytest.approx(0.128)
        assert bonferroni_adjust([0.0], 7)[0] == 0.0

    def test_cap_at_one(self):
        assert bonferroni_adjust([0.9, 0.5, 0.03], 32) == [1.0, 1.0, 0.96]

    def test_identity_when_m_is_one(self):
        assert bonferroni_adjust([0.37], 1)[0] == 0.37

    def test_monotone(self):
        rng = np.random.default_rng(81)
        p = np.sort(rng.uniform(size=20))
        adj = bonferroni_adjust(p, 32)
        assert all(a <= b for a, b in zip(adj, adj[1:]))

    def test_input_validation(self):
        with pytest.raises(DiagnosticError):
            bonferroni_adjust([1.5], 5)
        with pytest.raises(DiagnosticError):
            bonferroni_adjust([0.1, 0.2, 0.3], 2)


class TestQQData:
    def test_normal_sample_coverage(self):
        rng = np.random.default_rng(91)
        fractions = []
        for _ in range(50):
            x = rng.normal(size=1000)
            qq = qq_data(x)
            inside = (qq.sample_quantiles >= qq.band_lower) & (
                qq.sample_quantiles <= qq.band_upper
            )
            fractions.append(inside.mean())
        assert np.mean(fractions) >= 0.90

    def test_shuffle_invariance(self):
        rng = np.random.default_rng(92)
        x = rng.normal(size=200)
        shuffled = x.copy()
        rng.shuffle(shuffled)
        a, b = qq_data(x), qq_data(shuffled)
        assert np.array_equal(a.sample_quantiles, b.sample_quantiles)
        assert np.array_equal(a.band_lower, b.band_lower)

    def test_heavy_tails_escape_bands(self):
        rng = np.random.default_rng(93)
        hits = 0
        for _ in range(50):
            x = rng.standard_t(2, size=1000)
            qq = qq_data(x)
            outside = (qq.sample_quantiles < qq.band_lower) | (
                qq.sample_quantiles > qq.band_upper
            )
            hits += outside.any()
        assert hits / 50 >= 0.90

    def test_theoretical_quantiles_increasing(self):
        qq = qq_data(np.random.default_rng(94).normal(size=57))
        assert np.all(np.diff(qq.theoretical_quantiles) > 0.0)
        assert len(qq.sample_quantiles) == len(qq.band_lower) == 57

    def test_length_check(self):
        with pytest.raises(DiagnosticError):
            qq_data(np.arange(5.0))


class TestBattery:
    def test_white_noise_rarely_anomalous(self):
        rng = np.random.default_rng(101)
        cfg = BatteryConfig()
        flags = sum(run_battery(rng.normal(size=500), cfg).anomaly for _ in range(1000))
        assert flags / 1000 <= 0.03

    def test_random_walk_flagged(self):
        rng = np.random.default_rng(102)
        cfg = BatteryConfig()
        flags = sum(
            run_battery(rng.normal(size=500).cumsum(), cfg).anomaly for _ in range(200)
        )
        assert flags / 200 >= 0.90

    def test_empty_rejected(self):
        with pytest.raises(DiagnosticError):
            run_battery(np.array([]))

    def test_all_five_tests_present(self):
        b = run_battery(np.random.default_rng(103).normal(size=200))
        assert b.ljung_box.test_name == "ljung_box"
        assert b.kpss.test_name == "kpss"
        assert b.adf.test_name == "adf"
        assert b.phillips_perron.test_name == "phillips_perron"
        assert b.white_nn is not None

    def test_white_omitted_below_minimum_length(self):
        b = run_battery(np.random.default_rng(104).normal(size=40))
        assert b.white_nn is None

    def test_configurable_gate_set(self):
        rng = np.random.default_rng(105)
        walk = rng.normal(size=300).cumsum()
        assert run_battery(walk, BatteryConfig(gate_tests=("adf",))).anomaly
        assert not run_battery(walk, BatteryConfig(gate_tests=())).anomaly
        with pytest.raises(DiagnosticError):
            run_battery(walk, BatteryConfig(gate_tests=("nope",)))

    def test_p_values_in_unit_interval(self):
        rng = np.random.default_rng(106)
        for _ in range(20):
            b = run_battery(ar1(rng, 120, phi=0.2))
            for tr in (b.ljung_box, b.kpss, b.adf, b.phillips_perron, b.white_nn):
                if tr is not None:
                    assert 0.0 <= tr.p_value <= 1.0
