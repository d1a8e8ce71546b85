"""Automated ARIMA order selection.

Differencing order comes from repeated KPSS testing, the optional seasonal
difference from a seasonal-strength heuristic, and the ARMA orders from a
stepwise search over single-step neighbours scored by the corrected AIC.
The search is deterministic for fixed input and settings, and supports
warm-starting coefficient optimization from a previous fit of the same
candidate (used by the rolling cross-validation harness).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..diagnostics import DiagnosticError, kpss
from ..series import TimeSeries
from . import _numerics as nx
from .models import (
    ArimaOrder,
    EstimationError,
    FittedModel,
    _fit_core,
)

__all__ = ["SelectionSettings", "SelectionError", "auto_select_order", "auto_fit"]

CandidateKey = tuple[int, int, int, int, bool]  # (p, q, P, Q, intercept)


class SelectionError(EstimationError):
    """Every candidate model failed to fit."""


@dataclass(frozen=True)
class SelectionSettings:
    max_p: int = 5
    max_q: int = 5
    max_order: int = 5
    max_d: int = 2
    seasonal_period: int = 0
    max_seasonal_order: int = 2
    seasonal_strength_threshold: float = 0.64
    kpss_alpha: float = 0.05
    gtol: float = 1e-8
    search_gtol: float = 1e-4  # candidate screening; the winner is refit at gtol
    search_maxiter: int = 150
    maxiter: int = 500


def _ols_residuals(y: np.ndarray, covariates: Sequence[TimeSeries]) -> np.ndarray:
    if not covariates:
        return y
    X = np.column_stack([np.ones(len(y))] + [c.values for c in covariates])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return y - X @ beta


def _seasonal_strength(x: np.ndarray, period: int) -> float:
    """Variance share of the seasonal component after moving-average detrending."""
    n = len(x)
    if n < 2 * period + 2:
        return 0.0
    half = period // 2
    if period % 2 == 0:
        w = np.full(period + 1, 1.0 / period)
        w[0] = w[-1] = 0.5 / period
    else:
        w = np.full(period, 1.0 / period)
    trend = np.convolve(x, w, mode="valid")
    detr = x[half : half + len(trend)] - trend
    var_detr = float(np.var(detr))
    if var_detr <= 0.0:
        return 0.0
    pos = (np.arange(len(detr)) + half) % period
    remainder = detr.copy()
    for s in range(period):
        mask = pos == s
        if np.any(mask):
            remainder[mask] -= remainder[mask].mean()
    return max(0.0, 1.0 - float(np.var(remainder)) / var_detr)


def _select_differencing(
    z: np.ndarray, settings: SelectionSettings
) -> tuple[int, int]:
    """Seasonal difference by the strength heuristic, then regular differences
    until KPSS stops rejecting stationarity (capped)."""
    D = 0
    period = settings.seasonal_period
    if period >= 2 and _seasonal_strength(z, period) > settings.seasonal_strength_threshold:
        D = 1
        z = z[period:] - z[:-period]
    d = 0
    while d < settings.max_d and len(z) >= 30:
        try:
            if kpss(z).p_value >= settings.kpss_alpha:
                break
        except DiagnosticError:
            break
        z = np.diff(z)
        d += 1
    return d, D


def _start_vector(model: FittedModel) -> np.ndarray | None:
    blocks = []
    for coeffs in (
        model.ar_coeffs,
        model.ma_coeffs,
        model.seasonal_ar_coeffs,
        model.seasonal_ma_coeffs,
    ):
        raw, ok = nx.coef_to_pacf(np.ascontiguousarray(coeffs, dtype=np.float64))
        if not ok:
            return None
        blocks.append(raw)
    return np.concatenate(blocks) if blocks else np.empty(0)


def _aicc(model: FittedModel) -> float:
    k = model.n_params
    denom = model.n_eff - k - 1
    if denom <= 0:
        return np.inf
    return model.aic + 2.0 * k * (k + 1) / denom


def auto_fit(
    target: TimeSeries,
    covariates: Sequence[TimeSeries] = (),
    settings: SelectionSettings = SelectionSettings(),
    warm: dict[CandidateKey, np.ndarray] | None = None,
) -> FittedModel:
    """Select orders by stepwise corrected-AIC search and return the best fit.

    The search starts from {(0,0), (1,0), (0,1), (2,2)} plus the constant
    toggle of (0,0) and moves one step at a time in p, q (and the seasonal
    orders when a seasonal difference was selected), also toggling the
    intercept. ``warm`` maps candidate keys to starting coefficient vectors
    and is updated in place with the winners of this call.
    """
    if len(target) < 30:
        raise SelectionError(f"auto selection needs at least 30 observations, got {len(target)}")
    covariates = tuple(covariates)
    z = _ols_residuals(target.values.copy(), covariates)
    d, D = _select_differencing(z, settings)
    period = settings.seasonal_period
    seasonal_active = period >= 2 and D > 0
    default_const = (d + D) == 0

    scored: dict[CandidateKey, float] = {}
    fits: dict[CandidateKey, FittedModel] = {}
    design_cache: dict = {}

    def evaluate(key: CandidateKey) -> float:
        if key in scored:
            return scored[key]
        p, q, P, Q, const = key
        score = np.inf
        if (
            0 <= p <= settings.max_p
            and 0 <= q <= settings.max_q
            and 0 <= P <= settings.max_seasonal_order
            and 0 <= Q <= settings.max_seasonal_order
            and p + q + P + Q <= settings.max_order
        ):
            try:
                order = ArimaOrder(
                    p, d, q,
                    seasonal_period=period if (P or Q or D) else 0,
                    P=P, D=D, Q=Q,
                )
                start = warm.get(key) if warm is not None else None
                model = _fit_core(
                    target, covariates, order, const,
                    settings.search_gtol, settings.search_maxiter, start=start,
                    design_cache=design_cache,
                )
                if model.converged:
                    score = _aicc(model)
                    fits[key] = model
            except EstimationError:
                score = np.inf
        scored[key] = score
        return score

    start_set: list[CandidateKey] = [
        (0, 0, 0, 0, default_const),
        (1, 0, 0, 0, default_const),
        (0, 1, 0, 0, default_const),
        (2, 2, 0, 0, default_const),
        (0, 0, 0, 0, not default_const),
    ]
    if seasonal_active:
        start_set.append((1, 0, 1, 0, default_const))

    best_key: CandidateKey | None = None
    best_score = np.inf
    for key in start_set:
        s = evaluate(key)
        if s < best_score:
            best_score, best_key = s, key

    if best_key is not None:
        improved = True
        while improved:
            improved = False
            p, q, P, Q, const = best_key
            moves: list[CandidateKey] = [
                (p - 1, q, P, Q, const),
                (p + 1, q, P, Q, const),
                (p, q - 1, P, Q, const),
                (p, q + 1, P, Q, const),
                (p, q, P, Q, not const),
            ]
            if seasonal_active:
                moves += [
                    (p, q, P - 1, Q, const),
                    (p, q, P + 1, Q, const),
                    (p, q, P, Q - 1, const),
                    (p, q, P, Q + 1, const),
                ]
            for key in moves:
                s = evaluate(key)
                if s < best_score:
                    best_score, best_key = s, key
                    improved = True

    if best_key is None or not np.isfinite(best_score):
        raise SelectionError("no candidate order produced a valid fit")

    best = fits[best_key]
    if settings.gtol < settings.search_gtol:
        sv = _start_vector(best)
        if sv is not None:
            try:
                best = _fit_core(
                    target, covariates, best.order, best_key[4],
                    settings.gtol, settings.maxiter, start=sv,
                    design_cache=design_cache,
                )
            except EstimationError:
                pass  # keep the screening fit
    if warm is not None:
        for key, model in fits.items():
            sv = _start_vector(model)
            if sv is not None:
                warm[key] = sv
    return best


def auto_select_order(
    target: TimeSeries,
    covariates: Sequence[TimeSeries] = (),
    settings: SelectionSettings = SelectionSettings(),
) -> ArimaOrder:
    """Order chosen by the stepwise search; see :func:`auto_fit`."""
    return auto_fit(target, covariates, settings).order
