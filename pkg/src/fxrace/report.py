"""Report serialization and file emission.

``emit_report`` writes the table- and plot-shaped CSV files plus a JSON
manifest; ``report_to_dict``/``report_from_dict`` give a lossless JSON
round trip so a saved race can be re-emitted without recomputation.
All output is deterministic: fixed column orders, fixed row orders and
repr-based float formatting.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import re
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .diagnostics import TestResult, bonferroni_adjust, qq_data
from .evaluation import (
    RAND_NAME,
    RW_NAME,
    HorseRaceReport,
    SkipRecord,
    SplitDiagnostics,
    SplitSummary,
)
from .ingest import PreprocessLog
from .series import MomentSummary, acf, pacf

__all__ = ["emit_report", "report_to_dict", "report_from_dict", "load_report", "save_report"]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return repr(x)
    return str(x)


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(c) for c in row])


def emit_report(
    report: HorseRaceReport,
    out_dir: str | Path,
    preprocess_log: PreprocessLog | None = None,
) -> list[Path]:
    """Write the full report file set into ``out_dir``; returns the paths.

    Files: delta_ic.csv (scaled information criteria per predictor),
    mode_votes.csv (win counts by covariate and window size),
    predictability.csv (split-averaged loss differences and rankings),
    diagnostics_<cov>.csv and residual_moments_<cov>.csv (per-split
    forecast-error tests and moments), qq_/acf_pacf_ plot data for the
    configured detail windows, report.json and run_manifest.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    grid = list(report.window_grid)
    s = len(grid)
    reg_arms = report.covariates + [RAND_NAME]

    rows = []
    for arm in reg_arms:
        rows.append(
            [
                arm,
                report.delta_aic[arm][0],
                report.delta_aic[arm][1],
                report.delta_bic[arm][0],
                report.delta_bic[arm][1],
                report.bic_rank[arm],
            ]
        )
    p = out / "delta_ic.csv"
    _write_csv(
        p,
        ["predictor", "delta_aic_rw", "delta_aic_regarima", "delta_bic_rw", "delta_bic_regarima", "bic_rank"],
        rows,
    )
    written.append(p)

    rows = []
    for arm in reg_arms:
        rows.append(
            [
                "covariate",
                arm,
                report.mode_votes_covariate["msfe"].get(arm, 0),
                report.mode_votes_covariate["mae"].get(arm, 0),
            ]
        )
    for R in grid:
        rows.append(
            [
                "window",
                R,
                report.mode_votes_window["msfe"].get(R, 0),
                report.mode_votes_window["mae"].get(R, 0),
            ]
        )
    p = out / "mode_votes.csv"
    _write_csv(p, ["kind", "key", "wins_msfe", "wins_mae"], rows)
    written.append(p)

    rows = []
    for arm in reg_arms:
        rows.append(
            [
                arm,
                report.avg_delta_msfe.get(arm),
                report.freq_rank.get(arm),
                report.pred_rank.get(arm),
                report.rank_differences.get(arm),
            ]
        )
    p = out / "predictability.csv"
    _write_csv(p, ["covariate", "avg_delta_msfe", "freq_rank", "pred_rank", "rank_difference"], rows)
    written.append(p)

    for arm in reg_arms:
        summaries = [report.summaries[(arm, R)] for R in grid]
        raw_lb = [_diag_p(sm, "ljung_box") for sm in summaries]
        raw_kp = [_diag_p(sm, "kpss") for sm in summaries]
        raw_wh = [_diag_p(sm, "white_nn") for sm in summaries]
        adj_lb = _adjust_optional(raw_lb, s)
        adj_kp = _adjust_optional(raw_kp, s)
        adj_wh = _adjust_optional(raw_wh, s)
        rows = []
        mrows = []
        for i, sm in enumerate(summaries):
            rows.append(
                [
                    "+" if sm.outperformed_rw else "-",
                    sm.R,
                    sm.P_effective,
                    sm.mean_error,
                    raw_lb[i],
                    adj_lb[i],
                    raw_kp[i],
                    adj_kp[i],
                    raw_wh[i],
                    adj_wh[i],
                ]
            )
            mom = sm.diagnostics.moments if sm.diagnostics else None
            mrows.append(
                [
                    sm.R,
                    sm.P_effective,
                    mom.mean if mom else None,
                    mom.variance if mom else None,
                    mom.skewness if mom else None,
                    mom.kurtosis if mom else None,
                ]
            )
        p = out / f"diagnostics_{_safe_name(arm)}.csv"
        _write_csv(
            p,
            ["out", "R", "P", "mean_residual", "lb_raw", "lb_adj", "kp_raw", "kp_adj", "wh_raw", "wh_adj"],
            rows,
        )
        written.append(p)
        p = out / f"residual_moments_{_safe_name(arm)}.csv"
        _write_csv(p, ["R", "P", "mean", "variance", "skewness", "kurtosis"], mrows)
        written.append(p)

    detail = [R for R in report.config.detail_windows() if R in grid]
    for arm in reg_arms:
        for R in detail:
            sm = report.summaries[(arm, R)]
            if sm.diagnostics is None or len(sm.diagnostics.errors) < 10:
                continue
            errors = np.asarray(sm.diagnostics.errors, dtype=np.float64)
            qq = qq_data(errors)
            rows = [
                [t, sq, lo, hi]
                for t, sq, lo, hi in zip(
                    qq.theoretical_quantiles, qq.sample_quantiles, qq.band_lower, qq.band_upper
                )
            ]
            p = out / f"qq_{_safe_name(arm)}_{R}.csv"
            _write_csv(p, ["theoretical_quantile", "sample_quantile", "band_lower", "band_upper"], rows)
            written.append(p)

            max_lag = min(20, len(errors) - 1)
            if max_lag >= 1 and float(np.ptp(errors)) > 0.0:
                ac, band = acf(errors, max_lag)
                pc, _ = pacf(errors, max_lag)
                rows = [[lag + 1, ac[lag], pc[lag], band] for lag in range(max_lag)]
                p = out / f"acf_pacf_{_safe_name(arm)}_{R}.csv"
                _write_csv(p, ["lag", "acf", "pacf", "band"], rows)
                written.append(p)

    p = out / "report.json"
    save_report(report, p)
    written.append(p)

    manifest = {
        "config": report.config.to_json_dict(),
        "seed": report.config.seed,
        "versions": {
            "fxrace": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "covariates": report.covariates,
        "window_grid": grid,
        "total_attempted": report.total_attempted,
        "total_skipped": report.total_skipped,
        "overall_skip_rate": report.overall_skip_rate,
        "removed_covariates": preprocess_log.removed_covariates if preprocess_log else [],
        "preprocess_notes": preprocess_log.notes if preprocess_log else [],
        "log_transform_applied": preprocess_log.log_transform_applied if preprocess_log else None,
        "skipped_windows": [
            {"covariate": r.covariate_name, "R": r.R, "origin_index": r.origin_index, "reason": r.reason}
            for r in report.skip_records
        ],
    }
    p = out / "run_manifest.json"
    with open(p, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(p)
    return written


def _diag_p(sm: SplitSummary, test: str) -> float | None:
    if sm.diagnostics is None:
        return None
    tr = getattr(sm.diagnostics, test)
    return tr.p_value if tr is not None else None


def _adjust_optional(ps: list[float | None], m: int) -> list[float | None]:
    present = [p for p in ps if p is not None]
    if not present:
        return ps
    adjusted = iter(bonferroni_adjust(present, max(m, len(present))))
    return [next(adjusted) if p is not None else None for p in ps]


def _test_result_to_dict(tr: TestResult | None):
    if tr is None:
        return None
    return {
        "statistic": tr.statistic,
        "p_value": tr.p_value,
        "lags_or_df": tr.lags_or_df,
        "test_name": tr.test_name,
    }


def _test_result_from_dict(d) -> TestResult | None:
    return None if d is None else TestResult(**d)


def _nan_to_none(x: float) -> float | None:
    return None if isinstance(x, float) and math.isnan(x) else x


def _none_to_nan(x) -> float:
    return math.nan if x is None else float(x)


def report_to_dict(report: HorseRaceReport) -> dict:
    summaries = []
    for (arm, R), sm in sorted(report.summaries.items()):
        d = {
            "covariate_name": sm.covariate_name,
            "R": sm.R,
            "P_attempted": sm.P_attempted,
            "P_effective": sm.P_effective,
            "msfe": _nan_to_none(sm.msfe),
            "mae": _nan_to_none(sm.mae),
            "rw_msfe": _nan_to_none(sm.rw_msfe),
            "rw_mae": _nan_to_none(sm.rw_mae),
            "mean_aic": _nan_to_none(sm.mean_aic),
            "mean_bic": _nan_to_none(sm.mean_bic),
            "mean_error": _nan_to_none(sm.mean_error),
            "outperformed_rw": sm.outperformed_rw,
            "outperformed_rw_and_rand": sm.outperformed_rw_and_rand,
            "diagnostics": None,
        }
        if sm.diagnostics is not None:
            diag = sm.diagnostics
            d["diagnostics"] = {
                "ljung_box": _test_result_to_dict(diag.ljung_box),
                "kpss": _test_result_to_dict(diag.kpss),
                "white_nn": _test_result_to_dict(diag.white_nn),
                "moments": None
                if diag.moments is None
                else {
                    "mean": diag.moments.mean,
                    "variance": diag.moments.variance,
                    "skewness": _nan_to_none(diag.moments.skewness),
                    "kurtosis": _nan_to_none(diag.moments.kurtosis),
                },
                "errors": [float(e) for e in diag.errors],
            }
        summaries.append(d)
    return {
        "covariates": report.covariates,
        "window_grid": list(report.window_grid),
        "summaries": summaries,
        "delta_aic": {k: list(v) for k, v in report.delta_aic.items()},
        "delta_bic": {k: list(v) for k, v in report.delta_bic.items()},
        "bic_rank": report.bic_rank,
        "avg_delta_msfe": {k: _nan_to_none(v) for k, v in report.avg_delta_msfe.items()},
        "mode_votes_covariate": report.mode_votes_covariate,
        "mode_votes_window": {
            metric: {str(R): v for R, v in votes.items()}
            for metric, votes in report.mode_votes_window.items()
        },
        "freq_rank": report.freq_rank,
        "pred_rank": report.pred_rank,
        "rank_differences": report.rank_differences,
        "skip_records": [asdict(r) for r in report.skip_records],
        "config": report.config.to_json_dict(),
        "total_attempted": report.total_attempted,
        "total_skipped": report.total_skipped,
    }


def report_from_dict(data: dict) -> HorseRaceReport:
    summaries: dict[tuple[str, int], SplitSummary] = {}
    for d in data["summaries"]:
        diag = None
        if d.get("diagnostics") is not None:
            dd = d["diagnostics"]
            mom = dd.get("moments")
            diag = SplitDiagnostics(
                ljung_box=_test_result_from_dict(dd.get("ljung_box")),
                kpss=_test_result_from_dict(dd.get("kpss")),
                white_nn=_test_result_from_dict(dd.get("white_nn")),
                moments=None
                if mom is None
                else MomentSummary(
                    mom["mean"], mom["variance"],
                    _none_to_nan(mom["skewness"]), _none_to_nan(mom["kurtosis"]),
                ),
                errors=np.asarray(dd.get("errors", []), dtype=np.float64),
            )
        sm = SplitSummary(
            covariate_name=d["covariate_name"],
            R=d["R"],
            P_attempted=d["P_attempted"],
            P_effective=d["P_effective"],
            msfe=_none_to_nan(d["msfe"]),
            mae=_none_to_nan(d["mae"]),
            rw_msfe=_none_to_nan(d["rw_msfe"]),
            rw_mae=_none_to_nan(d["rw_mae"]),
            mean_aic=_none_to_nan(d["mean_aic"]),
            mean_bic=_none_to_nan(d["mean_bic"]),
            mean_error=_none_to_nan(d["mean_error"]),
            outperformed_rw=d["outperformed_rw"],
            outperformed_rw_and_rand=d["outperformed_rw_and_rand"],
            diagnostics=diag,
        )
        summaries[(sm.covariate_name, sm.R)] = sm
    return HorseRaceReport(
        covariates=list(data["covariates"]),
        window_grid=tuple(data["window_grid"]),
        summaries=summaries,
        delta_aic={k: tuple(v) for k, v in data["delta_aic"].items()},
        delta_bic={k: tuple(v) for k, v in data["delta_bic"].items()},
        bic_rank={k: int(v) for k, v in data["bic_rank"].items()},
        avg_delta_msfe={k: _none_to_nan(v) for k, v in data["avg_delta_msfe"].items()},
        mode_votes_covariate=data["mode_votes_covariate"],
        mode_votes_window={
            metric: {int(R): v for R, v in votes.items()}
            for metric, votes in data["mode_votes_window"].items()
        },
        freq_rank={k: int(v) for k, v in data["freq_rank"].items()},
        pred_rank={k: int(v) for k, v in data["pred_rank"].items()},
        rank_differences={k: int(v) for k, v in data["rank_differences"].items()},
        skip_records=[SkipRecord(**r) for r in data["skip_records"]],
        config=RunConfig.from_json_dict(data["config"]),
        total_attempted=data["total_attempted"],
        total_skipped=data["total_skipped"],
    )


def save_report(report: HorseRaceReport, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(report_to_dict(report), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_report(path: str | Path) -> HorseRaceReport:
    with open(path) as fh:
        return report_from_dict(json.load(fh))
