"""Synthetic panel generator for calibration and acceptance testing."""

from __future__ import annotations

import numpy as np

from .config import SimSpec
from .series import Panel, TimeSeries

__all__ = ["simulate_panel"]

SIGNAL_NAME = "signal"


def _ar1(rng: np.random.Generator, n: int, phi: float, stat_sd: float) -> np.ndarray:
    innov_sd = stat_sd * float(np.sqrt(1.0 - phi * phi))
    e = rng.normal(0.0, innov_sd, size=n)
    x = np.empty(n)
    x[0] = rng.normal(0.0, stat_sd)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


def simulate_panel(spec: SimSpec) -> Panel:
    """Random-walk target driven by the daily increments of one covariate.

    The target follows y_t = y_{t-1} + beta * x_{t-1} + eps_t where x is a
    zero-mean AR(1) process; the emitted covariate is the running count
    level c_t = sum_{s<=t} x_s, whose day-over-day change is exactly x_t.
    Differencing the target and covariate alike (the regARIMA convention)
    then recovers the generating equation, so a lag-1 regARIMA on c is
    correctly specified and the tuned one-step R^2 gain is attainable.
    With beta = 0 the target is a pure random walk whose one-step forecast
    error variance equals innovation_sd^2. ``n_noise`` extra covariates are
    built the same way from independent AR(1) drivers and carry no signal.
    With ``exp_levels`` the target is exponentiated, giving a positive,
    multiplicative series that the log-transform gate should undo.
    Deterministic for a fixed spec (seed included).
    """
    rng = np.random.default_rng(spec.seed)
    T = spec.T
    x = _ar1(rng, T, spec.covariate_phi, spec.covariate_sd)
    eps = rng.normal(0.0, spec.innovation_sd, size=T)
    y = np.empty(T)
    y[0] = spec.level0
    for t in range(1, T):
        y[t] = y[t - 1] + spec.beta * x[t - 1] + eps[t]
    if spec.exp_levels:
        y = np.exp(y)

    start = np.datetime64(spec.start_date, "D")
    index = start + np.arange(T)
    target = TimeSeries(index, y, "target")
    covs = [TimeSeries(index, np.cumsum(x), SIGNAL_NAME)]
    for j in range(spec.n_noise):
        driver = _ar1(rng, T, spec.covariate_phi, spec.covariate_sd)
        covs.append(TimeSeries(index, np.cumsum(driver), f"noise{j + 1}"))
    return Panel(target, tuple(covs))
