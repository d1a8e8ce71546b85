"""ARIMA, regARIMA and random-walk estimation with automated order selection."""

from .autoselect import SelectionError, SelectionSettings, auto_fit, auto_select_order
from .models import (
    ArimaOrder,
    CollinearityError,
    ConvergenceError,
    DegenerateError,
    EstimationError,
    FittedModel,
    Forecast,
    fit_arima,
    fit_random_walk,
    fit_regarima,
    forecast_one_step,
)

__all__ = [
    "ArimaOrder",
    "FittedModel",
    "Forecast",
    "EstimationError",
    "ConvergenceError",
    "CollinearityError",
    "DegenerateError",
    "SelectionError",
    "SelectionSettings",
    "fit_random_walk",
    "fit_arima",
    "fit_regarima",
    "forecast_one_step",
    "auto_fit",
    "auto_select_order",
]
