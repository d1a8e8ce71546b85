"""Rolling-origin horse race between regARIMA models and the random walk.

For every covariate (plus a resampled noise covariate and a pure
random-walk arm) and every estimation window size R, a fixed-width window
rolls one day at a time across the panel; each window is re-fit with
automated order selection, diagnosed, and used for a single one-step
forecast. Split-level summaries feed loss comparisons, information-criteria
scaling, mode votes and the frequency-vs-predictability rankings.

The (arm x R) task grid is embarrassingly parallel; every task derives its
randomness from the run seed with a stable hash, so results are identical
for any job count.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .arima.autoselect import SelectionSettings, auto_fit
from .arima.models import (
    CollinearityError,
    ConvergenceError,
    DegenerateError,
    EstimationError,
    forecast_one_step,
)
from .config import RunConfig
from .diagnostics import BatteryConfig, TestResult, ljung_box, kpss, run_battery, white_nn_test
from .series import MomentSummary, Panel, SeriesError, TimeSeries, moments, rank

__all__ = [
    "RAND_NAME",
    "RW_NAME",
    "EvaluationError",
    "WindowResult",
    "SplitSummary",
    "SplitDiagnostics",
    "SkipRecord",
    "HorseRaceReport",
    "rolling_cv",
    "msfe",
    "mae",
    "delta_scale",
    "make_noise_covariate",
    "avg_predictability",
    "rank_difference",
    "mode_vote",
    "run_horse_race",
]

RAND_NAME = "Rand"
RW_NAME = "RW"


class EvaluationError(ValueError):
    """Raised on invalid evaluation configuration or inputs."""


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from an arbitrary tuple of hashable parts."""
    blob = "|".join(repr(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little") >> 1


@dataclass
class WindowResult:
    """One estimation window's outcome within a split."""

    covariate_name: str | None
    R: int
    origin_index: int
    forecast: float | None
    actual: float | None
    skipped: bool
    skip_reason: str | None
    aic: float
    bic: float
    rw_forecast: float
    battery: object | None = None


@dataclass
class SplitDiagnostics:
    """Tests and moments of the out-of-sample forecast errors of one split."""

    ljung_box: TestResult | None
    kpss: TestResult | None
    white_nn: TestResult | None
    moments: MomentSummary | None
    errors: np.ndarray


@dataclass
class SplitSummary:
    """Aggregate of one (arm, R) split over its non-skipped windows."""

    covariate_name: str
    R: int
    P_attempted: int
    P_effective: int
    msfe: float
    mae: float
    rw_msfe: float
    rw_mae: float
    mean_aic: float
    mean_bic: float
    mean_error: float
    outperformed_rw: bool = False
    outperformed_rw_and_rand: bool = False
    diagnostics: SplitDiagnostics | None = None

    @property
    def skip_rate(self) -> float:
        return (self.P_attempted - self.P_effective) / self.P_attempted

    @property
    def void(self) -> bool:
        return self.P_effective == 0


@dataclass(frozen=True)
class SkipRecord:
    covariate_name: str
    R: int
    origin_index: int
    reason: str


@dataclass
class HorseRaceReport:
    """Everything the race produced, keyed for table and plot-data emission."""

    covariates: list[str]  # real covariates (no Rand, no RW)
    window_grid: tuple[int, ...]
    summaries: dict[tuple[str, int], SplitSummary]
    delta_aic: dict[str, tuple[float, float]]  # arm -> (RW delta, regARIMA delta)
    delta_bic: dict[str, tuple[float, float]]
    bic_rank: dict[str, int]
    avg_delta_msfe: dict[str, float]  # arm -> split-averaged MSFE difference vs RW
    mode_votes_covariate: dict[str, dict[str, int]]  # metric -> {arm: wins}
    mode_votes_window: dict[str, dict[int, int]]  # metric -> {R: wins}
    freq_rank: dict[str, int]  # 1 = most frequent (real covariates)
    pred_rank: dict[str, int]  # 1 = most predictive (real covariates + Rand)
    rank_differences: dict[str, int]  # negative = undertalked
    skip_records: list[SkipRecord]
    config: RunConfig
    total_attempted: int = 0
    total_skipped: int = 0

    @property
    def overall_skip_rate(self) -> float:
        return self.total_skipped / self.total_attempted if self.total_attempted else 0.0


def msfe(forecasts: Sequence[float], actuals: Sequence[float]) -> float:
    """Mean squared one-step forecast error."""
    f = np.asarray(forecasts, dtype=np.float64)
    a = np.asarray(actuals, dtype=np.float64)
    if len(f) == 0 or len(f) != len(a):
        raise EvaluationError("msfe needs equal nonzero-length forecast and actual vectors")
    return float(np.mean((a - f) ** 2))


def mae(forecasts: Sequence[float], actuals: Sequence[float]) -> float:
    """Mean absolute one-step forecast error."""
    f = np.asarray(forecasts, dtype=np.float64)
    a = np.asarray(actuals, dtype=np.float64)
    if len(f) == 0 or len(f) != len(a):
        raise EvaluationError("mae needs equal nonzero-length forecast and actual vectors")
    return float(np.mean(np.abs(a - f)))


def delta_scale(score_table) -> np.ndarray:
    """Rescale scores relative to the global minimum of the whole table.

    The minimum entry of the result is exactly 0 and all pairwise
    differences are preserved.
    """
    table = np.asarray(score_table, dtype=np.float64)
    if table.size == 0:
        raise EvaluationError("delta_scale needs a nonempty table")
    if np.any(np.isnan(table)):
        raise EvaluationError("delta_scale does not accept NaN entries")
    return table - np.min(table)


def make_noise_covariate(panel: Panel, seed: int) -> TimeSeries:
    """Noise covariate drawn with replacement from the pooled covariate values."""
    if not panel.covariates:
        raise EvaluationError("cannot build the noise covariate from an empty covariate set")
    pool = np.concatenate([c.values for c in panel.covariates])
    rng = np.random.default_rng(seed)
    draws = rng.choice(pool, size=panel.T, replace=True)
    return TimeSeries(panel.target.index, draws, RAND_NAME)


def avg_predictability(delta_msfe_by_split: Sequence[float]) -> float:
    """Arithmetic mean of per-split MSFE differences (negative beats the RW)."""
    x = np.asarray(delta_msfe_by_split, dtype=np.float64)
    if len(x) == 0:
        raise EvaluationError("avg_predictability needs at least one split")
    return float(np.mean(x))


def rank_difference(freq_ranks: dict[str, int], pred_ranks: dict[str, int]) -> dict[str, int]:
    """Frequency rank minus predictability rank, per covariate.

    Both rank sets must share the from-the-bottom orientation (rank 1 =
    least frequent / least predictive); then negative values mark
    "undertalked" covariates and positive ones "overtalked".
    """
    if set(freq_ranks) != set(pred_ranks):
        raise EvaluationError("frequency and predictability ranks cover different covariates")
    return {name: freq_ranks[name] - pred_ranks[name] for name in freq_ranks}


def _beats(candidate: SplitSummary, benchmarks: Iterable[SplitSummary], metric: str) -> bool:
    if candidate.void:
        return False
    value = getattr(candidate, metric)
    for bench in benchmarks:
        if bench.void or not value < getattr(bench, metric):
            return False
    return True


def mode_vote(
    summaries: dict[tuple[str, int], SplitSummary],
    metric: Literal["msfe", "mae"] = "msfe",
) -> tuple[dict[str, int], dict[int, int]]:
    """Count, per covariate and per window size, wins against RW and noise.

    A real covariate wins a split when its loss is strictly below both the
    random-walk arm's and the noise covariate's loss at that R (ties lose).
    The noise covariate's own count asks the symmetric question: did noise
    beat the random walk and every real covariate? The by-R counts cover the
    real covariates only.
    """
    if metric not in ("msfe", "mae"):
        raise EvaluationError(f"unknown mode-vote metric {metric!r}")
    grid = sorted({r for _, r in summaries})
    arms = sorted({a for a, _ in summaries})
    if RAND_NAME not in arms or RW_NAME not in arms:
        raise EvaluationError("mode_vote needs both the RW arm and the noise covariate rows")
    real = [a for a in arms if a not in (RAND_NAME, RW_NAME)]
    for a in arms:
        for r in grid:
            if (a, r) not in summaries:
                raise EvaluationError(f"summary grid is missing arm {a!r} at R={r}")

    by_cov: dict[str, int] = {a: 0 for a in real + [RAND_NAME]}
    by_r: dict[int, int] = {r: 0 for r in grid}
    for r in grid:
        rw = summaries[(RW_NAME, r)]
        rnd = summaries[(RAND_NAME, r)]
        for a in real:
            if _beats(summaries[(a, r)], (rw, rnd), metric):
                by_cov[a] += 1
                by_r[r] += 1
        others = [summaries[(a, r)] for a in real]
        if _beats(rnd, [rw] + others, metric):
            by_cov[RAND_NAME] += 1
    return by_cov, by_r


def _rw_window_stats(cum_sq: np.ndarray, a: int, t: int) -> tuple[float, float, float]:
    """(sigma2, aic, bic) of the no-drift random walk on window [a, t]."""
    n = t - a
    ss = cum_sq[t] - cum_sq[a]
    sigma2 = ss / n
    if sigma2 <= 0.0:
        return 0.0, math.inf, math.inf
    ll = -0.5 * n * (math.log(2.0 * math.pi) + 1.0 + math.log(sigma2))
    return sigma2, -2.0 * ll + 2.0, -2.0 * ll + math.log(n)


def rolling_cv(
    panel: Panel,
    covariate_name: str | None,
    R: int,
    config: RunConfig,
) -> list[WindowResult]:
    """Fixed-window rolling-origin evaluation of one arm at one window size.

    ``covariate_name`` picks the regARIMA arm (it must name a panel
    covariate, possibly the noise covariate), or None for the pure
    random-walk arm. Origins run t = R-1 .. T-2, so P_attempted = T - R.
    Windows are skipped (never silently dropped) on diagnostic anomalies,
    degenerate variance, collinearity or optimizer failure.
    """
    T = panel.T
    if R >= T:
        raise EvaluationError(f"window size R={R} must be smaller than the panel length T={T}")
    y = panel.target.values
    idx = panel.target.index
    diffs = np.diff(y)
    cum_sq = np.concatenate([[0.0], np.cumsum(diffs * diffs)])

    results: list[WindowResult] = []
    if covariate_name is None:
        for t in range(R - 1, T - 1):
            a = t - R + 1
            sigma2, aic, bic = _rw_window_stats(cum_sq, a, t)
            battery = None
            skipped, reason = False, None
            if sigma2 <= 0.0:
                skipped, reason = True, "degenerate"
            elif config.run_diagnostics:
                battery = run_battery(
                    diffs[a:t],
                    BatteryConfig(
                        alpha_gate=config.alpha_gate,
                        unit_root_alpha=config.unit_root_alpha,
                        gate_tests=config.gate_tests,
                        white_hidden=config.white_hidden,
                        white_seed=derive_seed(config.seed, "battery", RW_NAME, R, t),
                    ),
                )
                if battery.anomaly:
                    skipped, reason = True, "anomaly"
            results.append(
                WindowResult(
                    covariate_name=None,
                    R=R,
                    origin_index=t,
                    forecast=None if skipped else float(y[t]),
                    actual=None if skipped else float(y[t + 1]),
                    skipped=skipped,
                    skip_reason=reason,
                    aic=aic,
                    bic=bic,
                    rw_forecast=float(y[t]),
                    battery=battery,
                )
            )
        return results

    x = panel.covariate(covariate_name).values
    lag = config.covariate_lag
    settings = SelectionSettings(
        max_p=config.max_p,
        max_q=config.max_q,
        max_order=config.max_order,
        max_d=config.max_d,
        seasonal_period=config.seasonal_period,
        seasonal_strength_threshold=config.seasonal_strength_threshold,
        gtol=config.gtol,
        maxiter=config.maxiter,
    )
    warm: dict = {}
    for t in range(R - 1, T - 1):
        a = t - R + 1
        a0 = max(a, lag)  # the lagged covariate is unavailable before index `lag`
        _, rw_aic, rw_bic = _rw_window_stats(cum_sq, a, t)
        skipped, reason, battery = False, None, None
        forecast = actual = None
        aic = bic = math.nan
        try:
            y_win = TimeSeries(idx[a0 : t + 1], y[a0 : t + 1], panel.target.name)
            x_win = TimeSeries(idx[a0 : t + 1], x[a0 - lag : t + 1 - lag], covariate_name)
            model = auto_fit(y_win, (x_win,), settings, warm)
            aic, bic = model.aic, model.bic
            if model.degenerate:
                raise DegenerateError("degenerate window")
            if config.run_diagnostics:
                battery = run_battery(
                    model.residuals.values,
                    BatteryConfig(
                        alpha_gate=config.alpha_gate,
                        unit_root_alpha=config.unit_root_alpha,
                        gate_tests=config.gate_tests,
                        fitted_params=model.order.n_coef,
                        white_hidden=config.white_hidden,
                        white_seed=derive_seed(config.seed, "battery", covariate_name, R, t),
                    ),
                )
                if battery.anomaly:
                    skipped, reason = True, "anomaly"
            if not skipped:
                fc = forecast_one_step(model, y_win, [float(x[t + 1 - lag])])
                forecast = fc.point
                actual = float(y[t + 1])
        except DegenerateError:
            skipped, reason = True, "degenerate"
        except CollinearityError:
            skipped, reason = True, "collinear"
        except (ConvergenceError, EstimationError, SeriesError):
            skipped, reason = True, "convergence"
        results.append(
            WindowResult(
                covariate_name=covariate_name,
                R=R,
                origin_index=t,
                forecast=forecast,
                actual=actual,
                skipped=skipped,
                skip_reason=reason,
                aic=aic,
                bic=bic,
                rw_forecast=float(y[t]),
                battery=battery,
            )
        )
    return results


def summarize_split(
    windows: list[WindowResult],
    arm_name: str,
    diagnostics_seed: int | None = None,
) -> SplitSummary:
    """Collapse one arm's window results at one R into a SplitSummary.

    Loss metrics use the non-skipped windows only; the paired random-walk
    losses are computed over the same windows. A split where everything was
    skipped yields a void summary (NaN metrics) rather than disappearing.
    """
    if not windows:
        raise EvaluationError("summarize_split needs at least one window result")
    R = windows[0].R
    kept = [w for w in windows if not w.skipped]
    p_att, p_eff = len(windows), len(kept)
    if p_eff == 0:
        return SplitSummary(
            arm_name, R, p_att, 0,
            math.nan, math.nan, math.nan, math.nan, math.nan, math.nan, math.nan,
        )
    fc = np.array([w.forecast for w in kept])
    ac = np.array([w.actual for w in kept])
    rw_fc = np.array([w.rw_forecast for w in kept])
    errors = ac - fc
    diag = None
    if diagnostics_seed is not None:
        diag = _split_diagnostics(errors, diagnostics_seed)
    return SplitSummary(
        covariate_name=arm_name,
        R=R,
        P_attempted=p_att,
        P_effective=p_eff,
        msfe=msfe(fc, ac),
        mae=mae(fc, ac),
        rw_msfe=msfe(rw_fc, ac),
        rw_mae=mae(rw_fc, ac),
        mean_aic=float(np.mean([w.aic for w in kept])),
        mean_bic=float(np.mean([w.bic for w in kept])),
        mean_error=float(np.mean(errors)),
        diagnostics=diag,
    )


def _split_diagnostics(errors: np.ndarray, seed: int) -> SplitDiagnostics:
    lb = kp = wh = mom = None
    try:
        lb = ljung_box(errors)
    except Exception:
        pass
    try:
        kp = kpss(errors)
    except Exception:
        pass
    try:
        wh = white_nn_test(errors, seed=seed)
    except Exception:
        pass
    try:
        mom = moments(errors)
    except Exception:
        pass
    return SplitDiagnostics(lb, kp, wh, mom, errors)


def _run_task(args) -> tuple[str, int, SplitSummary, list[SkipRecord]]:
    panel, arm, R, config = args
    cov = None if arm == RW_NAME else arm
    windows = rolling_cv(panel, cov, R, config)
    summary = summarize_split(windows, arm, derive_seed(config.seed, "split-diag", arm, R))
    skips = [
        SkipRecord(arm, R, w.origin_index, w.skip_reason or "unknown")
        for w in windows
        if w.skipped
    ]
    return arm, R, summary, skips


def run_horse_race(panel: Panel, config: RunConfig) -> HorseRaceReport:
    """Race every covariate (plus noise and the pure RW arm) across the grid.

    The panel is expected to be preprocessed (near-zero-variance filter and
    the log-transform gate applied). Fully deterministic for a fixed
    (panel, config) pair, including under any ``config.jobs`` value.
    """
    if not panel.covariates:
        raise EvaluationError("run_horse_race needs at least one covariate")
    if max(config.window_grid) >= panel.T:
        raise EvaluationError(
            f"largest window {max(config.window_grid)} must be below the panel length {panel.T}"
        )
    rand = make_noise_covariate(panel, derive_seed(config.seed, "rand-covariate"))
    raced = panel.with_covariates(list(panel.covariates) + [rand])
    arms = [RW_NAME] + [c.name for c in panel.covariates] + [RAND_NAME]
    if RW_NAME in panel.covariate_names or RAND_NAME in panel.covariate_names:
        raise EvaluationError(f"covariate names {RW_NAME!r} and {RAND_NAME!r} are reserved")

    tasks = [(raced, arm, R, config) for arm in arms for R in config.window_grid]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outcomes = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        outcomes = [_run_task(t) for t in tasks]

    summaries: dict[tuple[str, int], SplitSummary] = {}
    skip_records: list[SkipRecord] = []
    for arm, R, summary, skips in sorted(
        outcomes, key=lambda o: (arms.index(o[0]), o[1])
    ):
        summaries[(arm, R)] = summary
        skip_records.extend(skips)

    # outperformance flags (MSFE convention)
    for R in config.window_grid:
        rw = summaries[(RW_NAME, R)]
        rnd = summaries[(RAND_NAME, R)]
        for arm in arms[1:]:
            s = summaries[(arm, R)]
            s.outperformed_rw = _beats(s, (rw,), "msfe")
            s.outperformed_rw_and_rand = _beats(s, (rw, rnd), "msfe")

    # information criteria, scaled against the global minimum
    reg_arms = arms[1:]
    rw_aic = float(np.nanmean([summaries[(RW_NAME, R)].mean_aic for R in config.window_grid]))
    rw_bic = float(np.nanmean([summaries[(RW_NAME, R)].mean_bic for R in config.window_grid]))
    mean_aic = {a: _nanmean_over_splits(summaries, a, config.window_grid, "mean_aic") for a in reg_arms}
    mean_bic = {a: _nanmean_over_splits(summaries, a, config.window_grid, "mean_bic") for a in reg_arms}
    aic_table = delta_scale(np.array([[rw_aic] + [mean_aic[a] for a in reg_arms]]))
    bic_table = delta_scale(np.array([[rw_bic] + [mean_bic[a] for a in reg_arms]]))
    delta_aic = {a: (float(aic_table[0, 0]), float(aic_table[0, i + 1])) for i, a in enumerate(reg_arms)}
    delta_bic = {a: (float(bic_table[0, 0]), float(bic_table[0, i + 1])) for i, a in enumerate(reg_arms)}
    bic_rank = dict(zip(reg_arms, rank([delta_bic[a][1] for a in reg_arms], "asc")))

    # split-averaged predictability vs the RW arm
    avg_delta_msfe: dict[str, float] = {}
    for arm in reg_arms:
        deltas = [
            summaries[(arm, R)].msfe - summaries[(RW_NAME, R)].msfe
            for R in config.window_grid
            if not summaries[(arm, R)].void and not summaries[(RW_NAME, R)].void
        ]
        avg_delta_msfe[arm] = avg_predictability(deltas) if deltas else math.nan

    votes_cov_msfe, votes_r_msfe = mode_vote(summaries, "msfe")
    votes_cov_mae, votes_r_mae = mode_vote(summaries, "mae")

    real = [c.name for c in panel.covariates]
    totals = [float(np.sum(panel.covariate(c).values)) for c in real]
    freq_bottom = dict(zip(real, rank(totals, "asc")))  # 1 = least frequent
    pred_scores_real = [avg_delta_msfe[c] for c in real]
    if any(math.isnan(v) for v in pred_scores_real):
        rank_diffs = {c: 0 for c in real}
        freq_top = {c: 0 for c in real}
    else:
        pred_bottom = dict(zip(real, rank(pred_scores_real, "desc")))  # 1 = least predictive
        rank_diffs = rank_difference(freq_bottom, pred_bottom)
        freq_top = dict(zip(real, rank(totals, "desc")))  # 1 = most frequent
    pred_arms = real + [RAND_NAME]
    pred_scores = [avg_delta_msfe[a] for a in pred_arms]
    if any(math.isnan(v) for v in pred_scores):
        pred_top = {a: 0 for a in pred_arms}
    else:
        pred_top = dict(zip(pred_arms, rank(pred_scores, "asc")))  # 1 = most predictive

    total_attempted = sum(s.P_attempted for s in summaries.values())
    total_skipped = sum(s.P_attempted - s.P_effective for s in summaries.values())

    return HorseRaceReport(
        covariates=real,
        window_grid=config.window_grid,
        summaries=summaries,
        delta_aic=delta_aic,
        delta_bic=delta_bic,
        bic_rank=bic_rank,
        avg_delta_msfe=avg_delta_msfe,
        mode_votes_covariate={"msfe": votes_cov_msfe, "mae": votes_cov_mae},
        mode_votes_window={"msfe": votes_r_msfe, "mae": votes_r_mae},
        freq_rank=freq_top,
        pred_rank=pred_top,
        rank_differences=rank_diffs,
        skip_records=skip_records,
        config=config,
        total_attempted=total_attempted,
        total_skipped=total_skipped,
    )


def _nanmean_over_splits(summaries, arm, grid, attr) -> float:
    vals = [getattr(summaries[(arm, R)], attr) for R in grid if not summaries[(arm, R)].void]
    return float(np.mean(vals)) if vals else math.nan
