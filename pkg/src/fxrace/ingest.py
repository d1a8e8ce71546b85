"""CSV ingestion and preprocessing of panels.

The target file has columns ``date,value``; the covariate file is wide,
``date,<name1>,<name2>,...``. Dates are ISO-8601. The two files are aligned
on the intersection of their dates; whatever survives must still be a
gap-free daily series or ingestion fails.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .diagnostics import DiagnosticError, breusch_pagan
from .series import (
    Panel,
    SeriesError,
    TimeSeries,
    log_transform,
    near_zero_variance_filter,
)

__all__ = ["IngestError", "IngestResult", "PreprocessLog", "ingest_panel", "preprocess", "write_panel_csv"]


class IngestError(ValueError):
    """Malformed input data; the message carries the file and row."""


@dataclass(frozen=True)
class IngestResult:
    panel: Panel
    dropped_dates: tuple[str, ...]


@dataclass
class PreprocessLog:
    removed_covariates: list[str] = field(default_factory=list)
    breusch_pagan_p: float | None = None
    log_transform_applied: bool = False
    notes: list[str] = field(default_factory=list)


def _read_csv(path: str | Path, expect_value_column: bool) -> tuple[list[str], dict]:
    """Returns (data column names, {date -> row values}) with validation."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"{path}: file does not exist")
    rows: dict[np.datetime64, list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if len(header) < 2 or header[0].strip().lower() != "date":
            raise IngestError(f"{path}: header must start with 'date' and have data columns")
        names = [h.strip() for h in header[1:]]
        if expect_value_column and names != ["value"]:
            raise IngestError(f"{path}: target file must have exactly the columns date,value")
        if len(set(names)) != len(names):
            raise IngestError(f"{path}: duplicate column names in header")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(names) + 1:
                raise IngestError(f"{path}: row {lineno}: expected {len(names) + 1} cells, found {len(row)}")
            try:
                date = np.datetime64(row[0].strip(), "D")
            except ValueError:
                raise IngestError(f"{path}: row {lineno}: bad date {row[0]!r}") from None
            if date in rows:
                raise IngestError(f"{path}: row {lineno}: duplicate date {row[0].strip()}")
            try:
                rows[date] = [float(c) for c in row[1:]]
            except ValueError:
                bad = next(c for c in row[1:] if not _is_number(c))
                raise IngestError(f"{path}: row {lineno}: non-numeric cell {bad!r}") from None
    if not rows:
        raise IngestError(f"{path}: no data rows")
    return names, rows


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def ingest_panel(target_path: str | Path, covariates_path: str | Path) -> IngestResult:
    """Load and align the target and covariate files on shared dates.

    Dates present in only one of the files are dropped and reported; the
    intersection must form a contiguous daily index (an interior gap is an
    ingestion error naming the missing date).
    """
    _, target_rows = _read_csv(target_path, expect_value_column=True)
    cov_names, cov_rows = _read_csv(covariates_path, expect_value_column=False)

    shared = sorted(set(target_rows) & set(cov_rows))
    if len(shared) < 2:
        raise IngestError("fewer than 2 shared dates between target and covariates")
    dropped = sorted(
        str(d) for d in (set(target_rows) ^ set(cov_rows))
    )
    index = np.array(shared, dtype="datetime64[D]")
    try:
        target = TimeSeries(index, [target_rows[d][0] for d in shared], "target")
        covs = [
            TimeSeries(index, [cov_rows[d][j] for d in shared], name)
            for j, name in enumerate(cov_names)
        ]
        panel = Panel(target, tuple(covs))
    except SeriesError as exc:
        raise IngestError(str(exc)) from None
    return IngestResult(panel, tuple(dropped))


def preprocess(panel: Panel, config: RunConfig) -> tuple[Panel, PreprocessLog]:
    """Near-zero-variance removal plus the heteroscedasticity-gated log transform.

    The Breusch-Pagan test on the target gates the log transform at
    ``config.alpha_gate``; every action (and every skipped action) lands in
    the log.
    """
    log = PreprocessLog()
    panel, removed = near_zero_variance_filter(
        panel, config.nzv_freq_ratio_cutoff, config.nzv_unique_pct_cutoff
    )
    log.removed_covariates = removed
    for name in removed:
        log.notes.append(f"removed near-zero-variance covariate {name!r}")
    if not panel.covariates:
        log.notes.append("no covariates survive the near-zero-variance filter")

    if config.log_gate:
        try:
            bp = breusch_pagan(panel.target)
            log.breusch_pagan_p = bp.p_value
            if bp.p_value < config.alpha_gate:
                if np.all(panel.target.values > 0.0):
                    panel = Panel(log_transform(panel.target), panel.covariates)
                    log.log_transform_applied = True
                    log.notes.append(
                        f"heteroscedastic target (BP p={bp.p_value:.4g}): log transform applied"
                    )
                else:
                    log.notes.append(
                        "BP test rejected homoscedasticity but the target has "
                        "non-positive values; log transform skipped"
                    )
            else:
                log.notes.append(f"no heteroscedasticity detected (BP p={bp.p_value:.4g})")
        except DiagnosticError as exc:
            log.notes.append(f"Breusch-Pagan gate skipped: {exc}")
    else:
        log.notes.append("log-transform gate disabled by configuration")
    return panel, log


def write_panel_csv(panel: Panel, target_path: str | Path, covariates_path: str | Path) -> None:
    """Write a panel back out in the ingestion format."""
    with open(target_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "value"])
        for d, v in zip(panel.target.index, panel.target.values):
            writer.writerow([str(d), repr(float(v))])
    with open(covariates_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date"] + panel.covariate_names)
        for i, d in enumerate(panel.target.index):
            writer.writerow([str(d)] + [repr(float(c.values[i])) for c in panel.covariates])
