"""Estimation and one-step forecasting for the raced model classes.

Three model families: the random walk without drift, ARIMA(p, d, q)
(optionally seasonal), and regression with ARIMA errors, all estimated by
exact Gaussian maximum likelihood. Regression coefficients are estimated
jointly with the ARMA coefficients by profiling them out of the
likelihood, so a regARIMA fit with no covariates reproduces the plain
ARIMA fit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..series import SeriesError, TimeSeries
from . import _numerics as nx

__all__ = [
    "ArimaOrder",
    "FittedModel",
    "Forecast",
    "EstimationError",
    "ConvergenceError",
    "CollinearityError",
    "DegenerateError",
    "fit_random_walk",
    "fit_arima",
    "fit_regarima",
    "forecast_one_step",
]

MAX_TOTAL_DIFF = 3


class EstimationError(ValueError):
    """Base class for estimation failures."""


class ConvergenceError(EstimationError):
    """Optimizer failed to converge; carries best-so-far diagnostics."""

    def __init__(self, message: str, *, best_loglik: float = math.nan, iterations: int = 0):
        super().__init__(f"{message} (best loglik {best_loglik:.6g} after {iterations} iterations)")
        self.best_loglik = best_loglik
        self.iterations = iterations


class CollinearityError(EstimationError):
    """Regression design is rank deficient after differencing."""


class DegenerateError(EstimationError):
    """The (differenced) series is constant; the innovation variance is zero."""


@dataclass(frozen=True)
class ArimaOrder:
    """Model orders: AR, differencing, MA plus optional weekly-style seasonal part."""

    p: int
    d: int
    q: int
    seasonal_period: int = 0
    P: int = 0
    D: int = 0
    Q: int = 0

    def __post_init__(self):
        for name in ("p", "d", "q", "seasonal_period", "P", "D", "Q"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 0:
                raise EstimationError(f"order field {name} must be a non-negative integer")
        if self.d + self.D > MAX_TOTAL_DIFF:
            raise EstimationError(f"total differencing d + D = {self.d + self.D} exceeds {MAX_TOTAL_DIFF}")
        if self.seasonal_period == 0 and (self.P or self.D or self.Q):
            raise EstimationError("seasonal orders require a seasonal_period > 0")
        if self.seasonal_period == 1:
            raise EstimationError("seasonal_period must be 0 or >= 2")

    @property
    def n_coef(self) -> int:
        return self.p + self.q + self.P + self.Q

    @property
    def total_diff(self) -> int:
        return self.d + self.seasonal_period * self.D


@dataclass(frozen=True)
class Forecast:
    point: float
    horizon: int
    origin_date: np.datetime64

    def __post_init__(self):
        if not math.isfinite(self.point):
            raise EstimationError("forecast point value is not finite")


@dataclass(frozen=True)
class FittedModel:
    """An estimated random walk / ARIMA / regARIMA model.

    ``residuals`` are the one-step innovations on the differenced scale
    (length n_eff). ``regressors`` stores the covariate series used in
    estimation so the model is self-contained for forecasting.
    """

    order: ArimaOrder
    ar_coeffs: np.ndarray
    ma_coeffs: np.ndarray
    seasonal_ar_coeffs: np.ndarray
    seasonal_ma_coeffs: np.ndarray
    reg_coeffs: np.ndarray
    intercept: float | None
    sigma2: float
    loglik: float
    aic: float
    bic: float
    residuals: TimeSeries
    n_eff: int
    n_params: int
    regressors: tuple[TimeSeries, ...] = field(default_factory=tuple)
    is_random_walk: bool = False
    converged: bool = True
    degenerate: bool = False
    boundary_warning: bool = False

    def ar_roots(self) -> np.ndarray:
        """Roots of the full (seasonal-expanded) AR polynomial."""
        phi = _expanded(self.ar_coeffs, self.seasonal_ar_coeffs, self.order.seasonal_period)
        return _poly_roots(phi)

    def ma_roots(self) -> np.ndarray:
        theta = -_expanded(
            -self.ma_coeffs, -self.seasonal_ma_coeffs, self.order.seasonal_period
        )
        return _poly_roots(theta)


def _expanded(nonseasonal: np.ndarray, seasonal: np.ndarray, period: int) -> np.ndarray:
    return nx.expand_poly(
        np.ascontiguousarray(nonseasonal, dtype=np.float64),
        np.ascontiguousarray(seasonal, dtype=np.float64),
        period,
    )


def _poly_roots(coeffs: np.ndarray) -> np.ndarray:
    if len(coeffs) == 0:
        return np.empty(0, dtype=np.complex128)
    return np.roots(np.concatenate(([1.0], -np.asarray(coeffs))))


def _diff_values(values: np.ndarray, d: int, D: int, period: int) -> np.ndarray:
    w = np.diff(values, n=d) if d else values.copy()
    for _ in range(D):
        if len(w) <= period:
            raise EstimationError("series too short for the seasonal differencing requested")
        w = w[period:] - w[:-period]
    return w


def _diff_polynomial(d: int, D: int, period: int) -> np.ndarray:
    """Coefficients of (1-B)^d (1-B^s)^D, starting with the lag-0 term 1."""
    poly = np.array([1.0])
    for _ in range(d):
        poly = np.convolve(poly, [1.0, -1.0])
    if D:
        seasonal = np.zeros(period + 1)
        seasonal[0], seasonal[-1] = 1.0, -1.0
        for _ in range(D):
            poly = np.convolve(poly, seasonal)
    return poly


def _information_criteria(loglik: float, n_params: int, n_eff: int) -> tuple[float, float]:
    aic = -2.0 * loglik + 2.0 * n_params
    bic = -2.0 * loglik + math.log(n_eff) * n_params
    return aic, bic


def fit_random_walk(series: TimeSeries) -> FittedModel:
    """Random walk without drift: residuals are the first differences.

    The Gaussian likelihood of the differences (no fitted mean) gives the
    log-likelihood and information criteria; sigma2 = 0 marks a degenerate
    (constant) series rather than raising.
    """
    if len(series) < 2:
        raise EstimationError(f"random walk needs at least 2 observations, got {len(series)}")
    diffs = np.diff(series.values)
    n = len(diffs)
    sigma2 = float(diffs @ diffs) / n
    degenerate = sigma2 <= 0.0
    if degenerate:
        loglik = -math.inf
        aic = bic = math.inf
    else:
        loglik = -0.5 * n * (nx.LOG_2PI + 1.0 + math.log(sigma2))
        aic, bic = _information_criteria(loglik, 1, n)
    return FittedModel(
        order=ArimaOrder(0, 1, 0),
        ar_coeffs=np.empty(0),
        ma_coeffs=np.empty(0),
        seasonal_ar_coeffs=np.empty(0),
        seasonal_ma_coeffs=np.empty(0),
        reg_coeffs=np.empty(0),
        intercept=None,
        sigma2=sigma2,
        loglik=loglik,
        aic=aic,
        bic=bic,
        residuals=TimeSeries(series.index[1:], diffs, series.name),
        n_eff=n,
        n_params=1,
        is_random_walk=True,
        degenerate=degenerate,
    )


def _check_design(V: np.ndarray) -> None:
    if V.shape[1] == 0:
        return
    r = np.abs(np.diag(np.linalg.qr(V, mode="r")))
    scale = float(np.max(r))
    if scale <= 0.0 or float(np.min(r)) < 1e-10 * scale:
        raise CollinearityError("regressors are collinear or constant after differencing")


def _fit_core(
    target: TimeSeries,
    covariates: Sequence[TimeSeries],
    order: ArimaOrder,
    include_intercept: bool | None,
    gtol: float,
    maxiter: int,
    start: np.ndarray | None = None,
    design_cache: dict | None = None,
) -> FittedModel:
    if include_intercept is None:
        include_intercept = order.d + order.D == 0

    cache_key = (order.d, order.D, order.seasonal_period, include_intercept)
    if design_cache is not None and cache_key in design_cache:
        W = design_cache[cache_key]
        n_eff = W.shape[0]
    else:
        for cov in covariates:
            if len(cov) != len(target) or not np.array_equal(cov.index, target.index):
                raise SeriesError(f"covariate {cov.name!r} is not aligned with the target index")
        w = _diff_values(target.values, order.d, order.D, order.seasonal_period)
        n_eff = len(w)
        cols = [w]
        for cov in covariates:
            cols.append(_diff_values(cov.values, order.d, order.D, order.seasonal_period))
        if include_intercept:
            cols.append(np.ones(n_eff))
        W = np.ascontiguousarray(np.column_stack(cols))
        if np.ptp(w) == 0.0:
            raise DegenerateError("differenced target is constant (zero innovation variance)")
        _check_design(W[:, 1:])
        if design_cache is not None:
            design_cache[cache_key] = W

    n_params = order.n_coef + len(covariates) + int(include_intercept) + 1
    if n_eff < 10 + n_params:
        raise EstimationError(
            f"effective sample size {n_eff} below the minimum {10 + n_params} for this order"
        )

    k = order.n_coef
    x0 = np.zeros(k) if start is None else np.ascontiguousarray(start, dtype=np.float64)
    if len(x0) != k:
        raise EstimationError("start vector length does not match the number of ARMA coefficients")
    x_opt, nll, converged, iters = nx.fit_profile(
        W, order.p, order.q, order.P, order.Q, order.seasonal_period, x0, gtol, maxiter
    )
    if nll >= nx.BIG:
        raise ConvergenceError(
            "likelihood evaluation failed over the whole search path",
            best_loglik=-math.inf,
            iterations=iters,
        )
    beta, sigma2, loglik, resid, state, phi_full, theta_full, ok = nx.profile_details(
        x_opt, W, order.p, order.q, order.P, order.Q, order.seasonal_period
    )
    if not ok:
        raise ConvergenceError("optimum is numerically degenerate", best_loglik=-n_eff * nll, iterations=iters)
    if sigma2 <= 0.0:
        raise DegenerateError("fitted innovation variance is zero")

    n_reg = len(covariates)
    reg_coeffs = beta[:n_reg].copy()
    intercept = float(beta[n_reg]) if include_intercept else None
    pacs = nx.PACF_CAP * np.tanh(x_opt)
    boundary = bool(len(pacs)) and float(np.max(np.abs(pacs))) > 0.99

    ar = nx.pacf_to_coef(np.ascontiguousarray(x_opt[: order.p]))
    ma = nx.pacf_to_coef(np.ascontiguousarray(x_opt[order.p : order.p + order.q]))
    sar = nx.pacf_to_coef(np.ascontiguousarray(x_opt[order.p + order.q : order.p + order.q + order.P]))
    sma = nx.pacf_to_coef(np.ascontiguousarray(x_opt[order.p + order.q + order.P :]))

    aic, bic = _information_criteria(loglik, n_params, n_eff)
    return FittedModel(
        order=order,
        ar_coeffs=ar,
        ma_coeffs=ma,
        seasonal_ar_coeffs=sar,
        seasonal_ma_coeffs=sma,
        reg_coeffs=reg_coeffs,
        intercept=intercept,
        sigma2=float(sigma2),
        loglik=float(loglik),
        aic=aic,
        bic=bic,
        residuals=TimeSeries(target.index[order.total_diff :], resid, target.name),
        n_eff=n_eff,
        n_params=n_params,
        regressors=tuple(covariates),
        converged=bool(converged),
        boundary_warning=boundary,
    )


def fit_arima(
    series: TimeSeries,
    order: ArimaOrder,
    include_intercept: bool | None = None,
    gtol: float = 1e-8,
    maxiter: int = 500,
) -> FittedModel:
    """Exact maximum-likelihood ARIMA fit on the d-times-differenced series.

    ``include_intercept`` defaults to fitting a mean when no differencing is
    applied and none otherwise (a drift term on the differenced scale when
    set explicitly with d > 0).
    """
    return _fit_core(series, (), order, include_intercept, gtol, maxiter)


def fit_regarima(
    target: TimeSeries,
    covariates: Sequence[TimeSeries],
    order: ArimaOrder,
    include_intercept: bool | None = None,
    gtol: float = 1e-8,
    maxiter: int = 500,
) -> FittedModel:
    """Regression with ARIMA errors, estimated jointly by maximum likelihood.

    Target and covariates are differenced alike before estimation; the
    regression coefficients are profiled out of the Gaussian likelihood, so
    this nests :func:`fit_arima` when ``covariates`` is empty.
    """
    return _fit_core(target, tuple(covariates), order, include_intercept, gtol, maxiter)


def forecast_one_step(
    model: FittedModel,
    history: TimeSeries,
    covariate_future: Sequence[float] = (),
) -> Forecast:
    """One-step-ahead point forecast on the original (undifferenced) scale.

    ``history`` must be the data the model was estimated on (the model's
    regressors share its index). For regARIMA models the regressor values at
    the forecast date must be supplied in ``covariate_future``, one per
    covariate in estimation order. A pure random walk forecasts the last
    observed value exactly.
    """
    origin = history.index[-1]
    if model.is_random_walk:
        return Forecast(float(history.values[-1]), 1, origin)

    n_reg = len(model.regressors)
    if len(covariate_future) != n_reg:
        raise EstimationError(
            f"model has {n_reg} regressors but {len(covariate_future)} future values were given"
        )
    order = model.order
    if len(history) <= order.total_diff:
        raise EstimationError("history too short for the model's differencing")
    for cov in model.regressors:
        if len(cov) != len(history) or not np.array_equal(cov.index, history.index):
            raise SeriesError("history is not compatible with the model's estimation index")

    w = _diff_values(history.values, order.d, order.D, order.seasonal_period)
    u = w.copy()
    for j, cov in enumerate(model.regressors):
        u -= model.reg_coeffs[j] * _diff_values(
            cov.values, order.d, order.D, order.seasonal_period
        )
    if model.intercept is not None:
        u -= model.intercept

    phi = _expanded(model.ar_coeffs, model.seasonal_ar_coeffs, order.seasonal_period)
    theta = -_expanded(-model.ma_coeffs, -model.seasonal_ma_coeffs, order.seasonal_period)
    if len(phi) == 0 and len(theta) == 0:
        u_next = 0.0
    else:
        _, _, state, ok = nx.filter_multi(
            np.ascontiguousarray(u.reshape(-1, 1)), phi, theta
        )
        if not ok:
            raise EstimationError("filtering failed with the stored coefficients")
        u_next = float(state[0, 0])

    w_next = u_next
    if model.intercept is not None:
        w_next += model.intercept
    if n_reg:
        poly = _diff_polynomial(order.d, order.D, order.seasonal_period)
        for j, cov in enumerate(model.regressors):
            x_next = float(covariate_future[j])
            v_next = x_next
            for i in range(1, len(poly)):
                v_next += poly[i] * cov.values[len(cov) - i]
            w_next += model.reg_coeffs[j] * v_next

    poly = _diff_polynomial(order.d, order.D, order.seasonal_period)
    y_next = w_next
    for i in range(1, len(poly)):
        y_next -= poly[i] * history.values[len(history) - i]
    return Forecast(float(y_next), 1, origin)
