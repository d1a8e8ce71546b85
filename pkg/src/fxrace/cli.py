"""Command-line interface.

Subcommands:
  validate   ingest and preprocess only, printing the log (writes nothing)
  run        full horse race: ingest, preprocess, race, emit report files
  simulate   write a synthetic panel in the ingestion CSV format
  report     re-emit the CSV file set from a saved report.json

Exit codes: 0 success, 1 input/configuration error, 2 race completed but
the anomaly-skip rate exceeded the configured budget.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, SimSpec
from .diagnostics import DiagnosticError
from .evaluation import EvaluationError, run_horse_race
from .ingest import IngestError, ingest_panel, preprocess, write_panel_csv
from .report import emit_report, load_report
from .series import SeriesError
from .simulate import simulate_panel

INPUT_ERRORS = (IngestError, ConfigError, SeriesError, EvaluationError, DiagnosticError)


def _parse_windows(text: str) -> tuple[int, ...]:
    try:
        parts = [int(p) for p in text.split(":")]
    except ValueError:
        raise ConfigError(f"bad --windows value {text!r}; use start:stop:step") from None
    if len(parts) == 1:
        return (parts[0],)
    if len(parts) == 2:
        parts.append(10)
    if len(parts) != 3 or parts[2] <= 0:
        raise ConfigError(f"bad --windows value {text!r}; use start:stop:step")
    start, stop, step = parts
    return tuple(range(start, stop + 1, step))


def _load_config(args) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "windows", None):
        overrides["window_grid"] = _parse_windows(args.windows)
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    return config.override(**overrides) if overrides else config


def _cmd_validate(args) -> int:
    config = _load_config(args)
    result = ingest_panel(args.target, args.covariates)
    panel, log = preprocess(result.panel, config)
    print(f"panel: T={panel.T}, covariates={len(panel.covariates)}")
    if result.dropped_dates:
        print(f"dropped {len(result.dropped_dates)} unshared dates")
    for note in log.notes:
        print(f"preprocess: {note}")
    print("validate: OK")
    return 0


def _cmd_run(args) -> int:
    config = _load_config(args)
    result = ingest_panel(args.target, args.covariates)
    panel, log = preprocess(result.panel, config)
    if not panel.covariates:
        print("error: no covariates left after preprocessing", file=sys.stderr)
        return 1
    report = run_horse_race(panel, config)
    paths = emit_report(report, args.out, log)
    print(f"wrote {len(paths)} files to {args.out}")
    print(
        f"windows attempted={report.total_attempted} skipped={report.total_skipped} "
        f"(rate {report.overall_skip_rate:.4f}, budget {config.skip_budget})"
    )
    if report.overall_skip_rate > config.skip_budget:
        print("error: skip rate exceeds the configured budget", file=sys.stderr)
        return 2
    return 0


def _cmd_simulate(args) -> int:
    spec = SimSpec(
        T=args.T,
        beta=args.beta,
        innovation_sd=args.innovation_sd,
        covariate_phi=args.covariate_phi,
        covariate_sd=args.covariate_sd,
        n_noise=args.n_noise,
        seed=args.seed if args.seed is not None else 0,
        exp_levels=args.exp_levels,
    )
    panel = simulate_panel(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_panel_csv(panel, out / "target.csv", out / "covariates.csv")
    print(f"wrote {out / 'target.csv'} and {out / 'covariates.csv'} (T={panel.T})")
    return 0


def _cmd_report(args) -> int:
    report = load_report(args.report)
    paths = emit_report(report, args.out)
    print(f"re-emitted {len(paths)} files to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fxrace",
        description="Horse race between regARIMA models and the random walk benchmark.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (flags override its values)")
    common.add_argument("--seed", type=int, help="run seed")
    common.add_argument("--windows", help="window grid start:stop:step, e.g. 310:620:10")
    common.add_argument("--jobs", type=int, help="parallel workers for the task grid")

    p = sub.add_parser("validate", parents=[common], help="dry-run ingestion and preprocessing")
    p.add_argument("--target", required=True, help="target CSV (date,value)")
    p.add_argument("--covariates", required=True, help="wide covariate CSV (date,name1,...)")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("run", parents=[common], help="run the full horse race")
    p.add_argument("--target", required=True)
    p.add_argument("--covariates", required=True)
    p.add_argument("--out", required=True, help="output directory for report files")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("simulate", parents=[common], help="emit a synthetic panel")
    p.add_argument("--out", required=True)
    p.add_argument("--T", type=int, default=636)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--innovation-sd", type=float, default=0.005, dest="innovation_sd")
    p.add_argument("--covariate-phi", type=float, default=0.7, dest="covariate_phi")
    p.add_argument("--covariate-sd", type=float, default=0.001, dest="covariate_sd")
    p.add_argument("--n-noise", type=int, default=0, dest="n_noise")
    p.add_argument("--exp-levels", action="store_true", dest="exp_levels")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("report", parents=[common], help="re-emit files from a saved report")
    p.add_argument("--report", required=True, help="path to report.json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
