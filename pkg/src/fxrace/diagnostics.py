"""Residual and preprocessing diagnostics.

Portmanteau, stationarity, nonlinearity and heteroscedasticity tests plus
multiple-testing adjustment and Q-Q plot data. All tests return a
:class:`TestResult`; p-values from tabulated distributions are interpolated
and clamped to the table range, mirroring the usual software conventions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special as ssp
from scipy import stats as sstats

from .series import SeriesError, TimeSeries, acf

__all__ = [
    "TestResult",
    "DiagnosticBattery",
    "BatteryConfig",
    "QQData",
    "DiagnosticError",
    "ljung_box",
    "kpss",
    "adf",
    "phillips_perron",
    "white_nn_test",
    "breusch_pagan",
    "vif",
    "bonferroni_adjust",
    "qq_data",
    "run_battery",
]


class DiagnosticError(ValueError):
    """Raised on invalid diagnostic input (too short, constant, bad p)."""


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    lags_or_df: int
    test_name: str

    def __post_init__(self):
        if not math.isfinite(self.statistic):
            raise DiagnosticError(f"{self.test_name}: non-finite statistic")
        if not 0.0 <= self.p_value <= 1.0:
            raise DiagnosticError(f"{self.test_name}: p-value {self.p_value} outside [0, 1]")


@dataclass(frozen=True)
class QQData:
    """Normal Q-Q plot data with 95% pointwise order-statistic bands."""

    sample_quantiles: np.ndarray
    theoretical_quantiles: np.ndarray
    band_lower: np.ndarray
    band_upper: np.ndarray


@dataclass(frozen=True)
class BatteryConfig:
    """Settings for :func:`run_battery`.

    ``gate_tests`` lists which tests may set the anomaly flag: ``ljung_box``
    rejects independence at ``alpha_gate``; ``adf``/``phillips_perron`` flag
    residuals that look nonstationary (fail to reject a unit root at
    ``unit_root_alpha``); ``kpss`` flags rejection of stationarity.
    """

    alpha_gate: float = 0.01
    unit_root_alpha: float = 0.05
    gate_tests: tuple[str, ...] = ("ljung_box", "adf", "phillips_perron")
    fitted_params: int = 0
    lb_lags: int | None = None
    adf_lag_policy: str = "aic"  # AIC keeps the gate's power on short windows
    white_hidden: int = 2
    white_seed: int = 0


@dataclass(frozen=True)
class DiagnosticBattery:
    ljung_box: TestResult
    kpss: TestResult
    adf: TestResult
    phillips_perron: TestResult
    white_nn: TestResult | None
    anomaly: bool


def _check_length(x: np.ndarray, minimum: int, test: str) -> None:
    if len(x) < minimum:
        raise DiagnosticError(f"{test} needs at least {minimum} observations, got {len(x)}")


def _as_values(x) -> np.ndarray:
    if isinstance(x, TimeSeries):
        return x.values
    return np.asarray(x, dtype=np.float64)


def _chi2_sf(x: float, df: int) -> float:
    return float(ssp.gammaincc(df / 2.0, x / 2.0))


def _ols(y: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares coefficients and residuals via the normal equations."""
    try:
        beta = np.linalg.solve(X.T @ X, X.T @ y)
    except np.linalg.LinAlgError:
        beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return beta, y - X @ beta


def ljung_box(residuals, n_lags: int | None = None, fitted_params: int = 0) -> TestResult:
    """Ljung-Box portmanteau test of residual independence.

    Q = n(n+2) * sum_{l<=L} r_l^2 / (n-l), referred to a chi-square with
    L - fitted_params degrees of freedom (floored at 1).
    """
    x = _as_values(residuals)
    n = len(x)
    if n_lags is None:
        n_lags = max(1, min(10, n // 5))
    if n_lags < 1:
        raise DiagnosticError("ljung_box needs n_lags >= 1")
    if n <= n_lags:
        raise DiagnosticError(f"ljung_box needs more than {n_lags} observations, got {n}")
    r, _ = acf(x, n_lags)  # raises on constant input
    lags = np.arange(1, n_lags + 1)
    q = n * (n + 2.0) * float(np.sum(r**2 / (n - lags)))
    df = max(1, n_lags - fitted_params)
    return TestResult(q, _chi2_sf(q, df), n_lags, "ljung_box")


def _bartlett_long_run_variance(u: np.ndarray, lags: int) -> float:
    n = len(u)
    lrv = float(u @ u) / n
    for j in range(1, lags + 1):
        w = 1.0 - j / (lags + 1.0)
        lrv += 2.0 * w * float(u[j:] @ u[:-j]) / n
    return lrv


def _newey_west_auto_lags(u: np.ndarray) -> int:
    """Automatic Bartlett bandwidth (Newey-West 1994 plug-in rule)."""
    n = len(u)
    covlags = int(n ** (2.0 / 9.0))
    s0 = float(u @ u) / n
    s1 = 0.0
    for i in range(1, covlags + 1):
        g = float(u[i:] @ u[:-i]) / n
        s0 += 2.0 * g
        s1 += 2.0 * i * g
    if s0 <= 0.0:
        return covlags
    gamma_hat = 1.1447 * abs(s1 / s0) ** (2.0 / 3.0)
    return max(0, min(n - 1, int(gamma_hat * n ** (1.0 / 3.0))))


_KPSS_STATS = np.array([0.347, 0.463, 0.574, 0.739])
_KPSS_PROBS = np.array([0.10, 0.05, 0.025, 0.01])

# Dickey-Fuller tau distribution, regression with constant (Fuller 1976;
# Banerjee et al. 1993). Rows are sample sizes, columns the probabilities
# in _ADF_PROBS.
_ADF_NOBS = np.array([25.0, 50.0, 100.0, 250.0, 500.0, 1e9])
_ADF_PROBS = np.array([0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99])
_ADF_TABLE = np.array(
    [
        [-3.75, -3.33, -3.00, -2.63, -0.37, 0.00, 0.34, 0.72],
        [-3.58, -3.22, -2.93, -2.60, -0.40, -0.03, 0.29, 0.66],
        [-3.51, -3.17, -2.89, -2.58, -0.42, -0.05, 0.26, 0.63],
        [-3.46, -3.14, -2.88, -2.57, -0.42, -0.06, 0.24, 0.62],
        [-3.44, -3.13, -2.87, -2.57, -0.43, -0.07, 0.24, 0.61],
        [-3.43, -3.12, -2.86, -2.57, -0.44, -0.07, 0.23, 0.60],
    ]
)


def _adf_p_value(stat: float, n: int) -> float:
    cvs = np.array(
        [np.interp(float(n), _ADF_NOBS, _ADF_TABLE[:, j]) for j in range(len(_ADF_PROBS))]
    )
    # cvs increase with the probability level, so direct interpolation works;
    # np.interp clamps outside the table, giving the [0.01, 0.99] bounds.
    return float(np.interp(stat, cvs, _ADF_PROBS))


def kpss(series) -> TestResult:
    """KPSS test of level stationarity with automatic Newey-West bandwidth.

    The p-value is interpolated from the published critical values and
    clamped to [0.01, 0.10].
    """
    x = _as_values(series)
    _check_length(x, 30, "kpss")
    e = x - x.mean()
    if float(e @ e) <= 0.0:
        raise DiagnosticError("kpss: constant series")
    n = len(x)
    s = np.cumsum(e)
    lags = _newey_west_auto_lags(e)
    lrv = _bartlett_long_run_variance(e, lags)
    if lrv <= 0.0:
        lrv = float(e @ e) / n
    stat = float(s @ s) / (n * n * lrv)
    p = float(np.interp(stat, _KPSS_STATS, _KPSS_PROBS))
    return TestResult(stat, p, lags, "kpss")


def adf(series, lag_policy: str = "fixed") -> TestResult:
    """Augmented Dickey-Fuller tau test (regression with constant).

    ``lag_policy`` "fixed" uses trunc((n-1)^(1/3)) augmentation lags, "aic"
    picks the lag in [0, that bound] minimizing the regression AIC. The
    p-value is interpolated from the Dickey-Fuller table and clamped to
    [0.01, 0.99].
    """
    x = _as_values(series)
    _check_length(x, 30, "adf")
    if np.ptp(x) == 0.0:
        raise DiagnosticError("adf: constant series")
    n = len(x)
    max_lag = int((n - 1) ** (1.0 / 3.0))
    if lag_policy not in ("fixed", "aic"):
        raise DiagnosticError(f"unknown adf lag policy {lag_policy!r}")

    # design over the sample common to every candidate lag:
    # dx_t on [x_{t-1}, dx_{t-1}, ..., dx_{t-max_lag}, 1]
    dx = np.diff(x)
    m = len(dx) - max_lag
    if m <= max_lag + 3:
        raise DiagnosticError("adf: series too short for the requested lags")
    y = dx[max_lag:]
    cols = [x[max_lag:-1]]
    cols += [dx[max_lag - j : len(dx) - j] for j in range(1, max_lag + 1)]
    cols.append(np.ones(m))
    Z = np.column_stack(cols)
    G = Z.T @ Z
    c = Z.T @ y
    yy = float(y @ y)

    def tau_at(k: int) -> tuple[float, float]:
        sel = [0] + list(range(1, k + 1)) + [max_lag + 1]
        Gs, cs = G[np.ix_(sel, sel)], c[sel]
        beta = np.linalg.solve(Gs, cs)
        rss = max(yy - float(beta @ cs), 1e-300)
        s2 = rss / (m - len(sel))
        e0 = np.zeros(len(sel))
        e0[0] = 1.0
        var0 = float(np.linalg.solve(Gs, e0)[0])
        stat = float(beta[0]) / math.sqrt(max(s2 * var0, 1e-300))
        aic = m * math.log(rss / m) + 2.0 * len(sel)
        return stat, aic

    if lag_policy == "fixed":
        stat, _ = tau_at(max_lag)
        k_used = max_lag
    else:
        best_aic, stat, k_used = math.inf, 0.0, 0
        for k in range(max_lag + 1):
            s, a = tau_at(k)
            if a < best_aic:
                best_aic, stat, k_used = a, s, k
    return TestResult(stat, _adf_p_value(stat, n), k_used, "adf")


def phillips_perron(series) -> TestResult:
    """Phillips-Perron Z-tau test (regression with constant, Bartlett kernel)."""
    x = _as_values(series)
    _check_length(x, 30, "phillips_perron")
    if np.ptp(x) == 0.0:
        raise DiagnosticError("phillips_perron: constant series")
    n = len(x) - 1
    y, ylag = x[1:], x[:-1]
    X = np.column_stack([ylag, np.ones(n)])
    beta, u = _ols(y, X)
    s2 = float(u @ u) / (n - 2)
    G = X.T @ X
    det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
    if det <= 0.0:
        raise DiagnosticError("phillips_perron: singular regression")
    se_rho = math.sqrt(max(s2 * G[1, 1] / det, 1e-300))
    t_rho = (float(beta[0]) - 1.0) / se_rho
    gamma0 = float(u @ u) / n
    lags = int(4.0 * (n / 100.0) ** 0.25)
    lam2 = _bartlett_long_run_variance(u, lags)
    if lam2 <= 0.0:
        lam2 = gamma0
    stat = math.sqrt(gamma0 / lam2) * t_rho - (lam2 - gamma0) * n * se_rho / (
        2.0 * math.sqrt(lam2) * math.sqrt(s2)
    )
    return TestResult(stat, _adf_p_value(stat, n + 1), lags, "phillips_perron")


def white_nn_test(series, n_hidden: int = 2, seed: int = 0) -> TestResult:
    """Neural-network test for neglected nonlinearity in the conditional mean.

    Regresses the series on its first lag, then tests whether ``n_hidden``
    logistic units of the (standardized) lag, with projection weights drawn
    uniformly on [-2, 2] from ``seed``, add explanatory power. LM = n * R^2
    of the auxiliary regression, referred to chi-square(n_hidden).
    Deterministic for fixed (data, n_hidden, seed).
    """
    x = _as_values(series)
    _check_length(x, 50, "white_nn_test")
    if n_hidden < 1:
        raise DiagnosticError("white_nn_test needs n_hidden >= 1")
    y, xl = x[1:], x[:-1]
    n = len(y)
    sd = float(np.std(xl))
    if sd <= 0.0:
        raise DiagnosticError("white_nn_test: constant series")
    z = (xl - float(np.mean(xl))) / sd

    rng = np.random.default_rng(seed)
    gamma = rng.uniform(-2.0, 2.0, size=(n_hidden, 2))
    hidden = 1.0 / (1.0 + np.exp(-(gamma[:, 0][None, :] + z[:, None] * gamma[:, 1][None, :])))

    X0 = np.column_stack([np.ones(n), xl])
    _, e = _ols(y, X0)
    X1 = np.column_stack([X0, hidden])
    _, v = _ols(e, X1)
    sse0 = float(e @ e)
    if sse0 <= 0.0:
        raise DiagnosticError("white_nn_test: degenerate linear fit")
    r2 = 1.0 - float(v @ v) / sse0
    lm = n * max(r2, 0.0)
    return TestResult(lm, _chi2_sf(lm, n_hidden), n_hidden, "white_nn")


def breusch_pagan(target) -> TestResult:
    """Breusch-Pagan LM test for heteroscedasticity against a linear time trend.

    Fits the series on a constant and trend, then regresses the squared
    residuals on the trend; LM = n * R^2 (studentized form), chi-square(1).
    Used as the gate for the log transformation.
    """
    x = _as_values(target)
    _check_length(x, 30, "breusch_pagan")
    if np.ptp(x) == 0.0:
        raise DiagnosticError("breusch_pagan: constant series")
    n = len(x)
    t = np.arange(n, dtype=np.float64)
    X = np.column_stack([np.ones(n), t])
    _, e = _ols(x, X)
    e2 = e**2
    if np.ptp(e2) == 0.0:
        raise DiagnosticError("breusch_pagan: residuals have no variance")
    _, v = _ols(e2, X)
    ss_tot = float(np.sum((e2 - e2.mean()) ** 2))
    r2 = 1.0 - float(v @ v) / ss_tot if ss_tot > 0 else 0.0
    lm = n * max(r2, 0.0)
    return TestResult(lm, _chi2_sf(lm, 1), 1, "breusch_pagan")


def vif(covariates: Sequence[TimeSeries]) -> list[float]:
    """Variance inflation factor of each covariate against all the others.

    Perfectly collinear covariates get an infinite VIF rather than an error.
    """
    if len(covariates) < 2:
        raise DiagnosticError("vif needs at least 2 covariates")
    mat = np.column_stack([_as_values(c) for c in covariates])
    n, k = mat.shape
    for j in range(k):
        if np.ptp(mat[:, j]) == 0.0:
            name = getattr(covariates[j], "name", str(j))
            raise DiagnosticError(f"vif: covariate {name!r} has zero variance")
    out = []
    for j in range(k):
        y = mat[:, j]
        X = np.column_stack([np.ones(n), np.delete(mat, j, axis=1)])
        _, resid = _ols(y, X)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(resid @ resid) / ss_tot
        out.append(math.inf if r2 >= 1.0 - 1e-12 else 1.0 / (1.0 - r2))
    return out


def bonferroni_adjust(p_values: Sequence[float], m: int) -> list[float]:
    """Bonferroni adjustment: each p becomes min(1, m * p)."""
    p = np.asarray(p_values, dtype=np.float64)
    if p.ndim != 1 or len(p) == 0:
        raise DiagnosticError("bonferroni_adjust needs a nonempty p-value list")
    if m < len(p):
        raise DiagnosticError(f"bonferroni m={m} smaller than the number of tests {len(p)}")
    if np.any((p < 0.0) | (p > 1.0) | np.isnan(p)):
        raise DiagnosticError("p-values must lie in [0, 1]")
    return np.minimum(1.0, m * p).tolist()


def qq_data(residuals) -> QQData:
    """Normal Q-Q plot data with 95% pointwise confidence bands.

    Sample order statistics are paired with normal quantiles at plotting
    positions (i - 0.5)/n; the bands come from the asymptotic normal
    approximation for order statistics of a fitted normal.
    """
    x = _as_values(residuals)
    _check_length(x, 10, "qq_data")
    n = len(x)
    sample = np.sort(x)
    probs = (np.arange(1, n + 1) - 0.5) / n
    theo = sstats.norm.ppf(probs)
    # moments from the sorted sample keep the output order-invariant bit for bit
    mu = float(np.mean(sample))
    sd = float(np.std(sample, ddof=1))
    dens = sstats.norm.pdf(theo)
    se = np.sqrt(probs * (1.0 - probs) / n) / dens
    lower = mu + sd * (theo - 1.96 * se)
    upper = mu + sd * (theo + 1.96 * se)
    return QQData(sample, theo, lower, upper)


def run_battery(residuals, config: BatteryConfig = BatteryConfig()) -> DiagnosticBattery:
    """Run the full residual test battery and combine the anomaly gates.

    The anomaly flag fires when any test in ``config.gate_tests`` signals a
    problem: Ljung-Box rejecting independence at ``alpha_gate``, a unit-root
    test failing to reject nonstationarity, or KPSS rejecting stationarity.
    The White test runs only when the sample is long enough for it.
    """
    x = _as_values(residuals)
    if len(x) == 0:
        raise DiagnosticError("run_battery: empty residuals")
    lb = ljung_box(x, n_lags=config.lb_lags, fitted_params=config.fitted_params)
    kp = kpss(x)
    ad = adf(x, lag_policy=config.adf_lag_policy)
    pp = phillips_perron(x)
    wh = None
    if len(x) >= 50:
        wh = white_nn_test(x, n_hidden=config.white_hidden, seed=config.white_seed)

    anomaly = False
    for gate in config.gate_tests:
        if gate == "ljung_box":
            anomaly |= lb.p_value < config.alpha_gate
        elif gate == "adf":
            anomaly |= ad.p_value > config.unit_root_alpha
        elif gate == "phillips_perron":
            anomaly |= pp.p_value > config.unit_root_alpha
        elif gate == "kpss":
            anomaly |= kp.p_value < config.alpha_gate
        elif gate == "white_nn":
            anomaly |= wh is not None and wh.p_value < config.alpha_gate
        else:
            raise DiagnosticError(f"unknown gate test {gate!r}")
    return DiagnosticBattery(lb, kp, ad, pp, wh, anomaly)
