"""fxrace: regARIMA vs random-walk forecasting horse race.

Rolling-origin fixed-window evaluation of regression-with-ARIMA-errors
models against the random-walk benchmark, with preprocessing filters,
residual diagnostics, a resampled noise-covariate baseline and
mode-vote scoring.
"""

__version__ = "0.1.0"
