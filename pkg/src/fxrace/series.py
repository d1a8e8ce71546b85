"""Time-series containers, transforms and descriptive statistics.

Everything here operates on equally spaced daily series. Values are stored
as float64 arrays and treated as immutable after construction; all functions
are pure and thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

__all__ = [
    "TimeSeries",
    "Panel",
    "MomentSummary",
    "SeriesError",
    "log_transform",
    "difference",
    "near_zero_variance_filter",
    "moments",
    "acf",
    "pacf",
    "rank",
]

ONE_DAY = np.timedelta64(1, "D")


class SeriesError(ValueError):
    """Raised when a series or panel violates its construction contract."""


def _as_date_index(index: Sequence) -> np.ndarray:
    idx = np.asarray(index, dtype="datetime64[D]")
    if idx.ndim != 1:
        raise SeriesError("index must be one-dimensional")
    return idx


@dataclass(frozen=True)
class TimeSeries:
    """Equally spaced daily observations with a date index.

    Invariants: the index increases strictly in one-day steps, values and
    index have equal length, and no value is missing (NaN) or infinite.
    """

    index: np.ndarray
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        idx = _as_date_index(self.index)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1:
            raise SeriesError(f"series {self.name!r}: values must be one-dimensional")
        if len(idx) != len(vals):
            raise SeriesError(
                f"series {self.name!r}: index length {len(idx)} != values length {len(vals)}"
            )
        if len(idx) == 0:
            raise SeriesError(f"series {self.name!r}: empty series")
        steps = np.diff(idx)
        if len(steps) and not np.all(steps == ONE_DAY):
            bad = int(np.argmax(steps != ONE_DAY))
            raise SeriesError(
                f"series {self.name!r}: index gap after {idx[bad]} "
                f"(expected {idx[bad] + ONE_DAY}, found {idx[bad + 1]})"
            )
        if not np.all(np.isfinite(vals)):
            bad = int(np.argmax(~np.isfinite(vals)))
            raise SeriesError(
                f"series {self.name!r}: missing or non-finite value at {idx[bad]}"
            )
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def window(self, start: int, stop: int) -> "TimeSeries":
        """Positional slice [start, stop) as a new series."""
        return TimeSeries(self.index[start:stop], self.values[start:stop], self.name)

    def with_values(self, values: np.ndarray, name: str | None = None) -> "TimeSeries":
        return TimeSeries(self.index, values, self.name if name is None else name)


@dataclass(frozen=True)
class Panel:
    """One target series plus k covariate series on a shared index."""

    target: TimeSeries
    covariates: tuple[TimeSeries, ...] = field(default_factory=tuple)

    def __post_init__(self):
        covs = tuple(self.covariates)
        object.__setattr__(self, "covariates", covs)
        if len(self.target) < 2:
            raise SeriesError("panel target needs at least 2 observations")
        names = [c.name for c in covs]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SeriesError(f"duplicate covariate names: {dupes}")
        for cov in covs:
            if len(cov) != len(self.target) or not np.array_equal(
                cov.index, self.target.index
            ):
                raise SeriesError(
                    f"covariate {cov.name!r} index differs from target index"
                )

    @property
    def T(self) -> int:
        return len(self.target)

    @property
    def covariate_names(self) -> list[str]:
        return [c.name for c in self.covariates]

    def covariate(self, name: str) -> TimeSeries:
        for cov in self.covariates:
            if cov.name == name:
                return cov
        raise KeyError(f"no covariate named {name!r}")

    def with_covariates(self, covariates: Sequence[TimeSeries]) -> "Panel":
        return Panel(self.target, tuple(covariates))


@dataclass(frozen=True)
class MomentSummary:
    """First four moments: population variance, standardized skew, raw kurtosis.

    Skewness and kurtosis are NaN for a degenerate (zero variance) input;
    kurtosis of a normal sample is close to 3, not 0.
    """

    mean: float
    variance: float
    skewness: float
    kurtosis: float


def log_transform(series: TimeSeries) -> TimeSeries:
    """Elementwise natural log; requires strictly positive values."""
    if np.any(series.values <= 0.0):
        bad = int(np.argmax(series.values <= 0.0))
        raise SeriesError(
            f"series {series.name!r}: non-positive value "
            f"{series.values[bad]} at {series.index[bad]}, cannot log-transform"
        )
    return series.with_values(np.log(series.values))


def difference(series: TimeSeries, d: int = 1) -> TimeSeries:
    """Apply the d-fold first-difference operator; d=0 is the identity.

    The result keeps the last len - d index entries.
    """
    if d < 0:
        raise SeriesError("differencing order must be >= 0")
    if len(series) <= d:
        raise SeriesError(
            f"series {series.name!r}: length {len(series)} too short to difference {d} times"
        )
    if d == 0:
        return series
    vals = np.diff(series.values, n=d)
    return TimeSeries(series.index[d:], vals, series.name)


def _freq_ratio_and_unique_pct(values: np.ndarray) -> tuple[float, float]:
    _, counts = np.unique(values, return_counts=True)
    counts = np.sort(counts)[::-1]
    unique_pct = 100.0 * len(counts) / len(values)
    if len(counts) == 1:
        return math.inf, unique_pct
    return counts[0] / counts[1], unique_pct


def near_zero_variance_filter(
    panel: Panel,
    freq_ratio_cutoff: float = 19.0,
    unique_pct_cutoff: float = 10.0,
) -> tuple[Panel, list[str]]:
    """Drop covariates that are (nearly) constant.

    A covariate is removed when the frequency ratio of its most common to
    second most common value exceeds ``freq_ratio_cutoff`` and the percentage
    of distinct values falls below ``unique_pct_cutoff``. A constant covariate
    has an infinite ratio and is always removed. The target is never touched
    and the surviving covariates keep their order.
    """
    if freq_ratio_cutoff <= 0 or unique_pct_cutoff <= 0:
        raise SeriesError("near-zero-variance cutoffs must be positive")
    kept: list[TimeSeries] = []
    removed: list[str] = []
    for cov in panel.covariates:
        ratio, unique_pct = _freq_ratio_and_unique_pct(cov.values)
        if ratio > freq_ratio_cutoff and unique_pct < unique_pct_cutoff:
            removed.append(cov.name)
        else:
            kept.append(cov)
    return panel.with_covariates(kept), removed


def moments(values: Sequence[float]) -> MomentSummary:
    """First four standardized central moments with population (n) divisors."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or len(x) < 4:
        raise SeriesError("moments need a one-dimensional sample of length >= 4")
    mean = float(np.mean(x))
    centered = x - mean
    m2 = float(np.mean(centered**2))
    if m2 <= 0.0:
        return MomentSummary(mean, 0.0, math.nan, math.nan)
    m3 = float(np.mean(centered**3))
    m4 = float(np.mean(centered**4))
    return MomentSummary(mean, m2, m3 / m2**1.5, m4 / m2**2)


def acf(values: Sequence[float], max_lag: int) -> tuple[np.ndarray, float]:
    """Sample autocorrelations at lags 1..max_lag plus the 1.96/sqrt(n) band.

    The redundant lag-0 spike is omitted. Uses the standard biased (divisor n)
    estimator, so every value lies in [-1, 1].
    """
    x = np.asarray(values, dtype=np.float64)
    n = len(x)
    if max_lag < 1:
        raise SeriesError("max_lag must be >= 1")
    if n <= max_lag:
        raise SeriesError(f"need more than {max_lag} observations, got {n}")
    centered = x - x.mean()
    denom = float(centered @ centered)
    if denom <= 0.0:
        raise SeriesError("constant series has no autocorrelation")
    out = np.empty(max_lag)
    for lag in range(1, max_lag + 1):
        out[lag - 1] = float(centered[lag:] @ centered[:-lag]) / denom
    return out, 1.96 / math.sqrt(n)


def pacf(values: Sequence[float], max_lag: int) -> tuple[np.ndarray, float]:
    """Partial autocorrelations at lags 1..max_lag via Durbin-Levinson."""
    r, band = acf(values, max_lag)
    out = np.empty(max_lag)
    out[0] = r[0]
    prev = np.array([r[0]])
    for k in range(2, max_lag + 1):
        num = r[k - 1] - float(prev @ r[k - 2 :: -1][: k - 1])
        den = 1.0 - float(prev @ r[: k - 1])
        rho = num / den if abs(den) > 1e-14 else 0.0
        coefs = np.empty(k)
        coefs[: k - 1] = prev - rho * prev[::-1]
        coefs[k - 1] = rho
        out[k - 1] = rho
        prev = coefs
    return out, band


def rank(
    scores: Sequence[float], direction: Literal["asc", "desc"] = "asc"
) -> list[int]:
    """Integer ranks with rank 1 the best score under ``direction``.

    ``asc`` makes the smallest score rank 1, ``desc`` the largest. Ties share
    the minimum rank of their group.
    """
    x = np.asarray(scores, dtype=np.float64)
    if x.ndim != 1 or len(x) == 0:
        raise SeriesError("rank needs a nonempty one-dimensional score list")
    if np.any(np.isnan(x)):
        raise SeriesError("rank does not accept NaN scores")
    if direction not in ("asc", "desc"):
        raise SeriesError(f"unknown rank direction {direction!r}")
    key = x if direction == "asc" else -x
    order = np.argsort(key, kind="stable")
    ranks = np.empty(len(x), dtype=np.int64)
    pos = 1
    for i, idx in enumerate(order):
        if i > 0 and key[idx] != key[order[i - 1]]:
            pos = i + 1
        ranks[idx] = pos
    return ranks.tolist()
