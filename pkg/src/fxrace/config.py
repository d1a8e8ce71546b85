"""Run configuration and synthetic-panel specification."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """Raised when a configuration value is invalid."""


@dataclass(frozen=True)
class RunConfig:
    """Settings for one horse-race run.

    ``window_grid`` are the estimation-window sizes R; the default grid
    310..620 in steps of 10 gives the 32 sample splits used throughout for
    636-day panels. ``covariate_lag`` shifts covariates back in time so the
    value used to forecast day t+1 is the covariate observed on day t
    (set 0 for a contemporaneous replication run).
    """

    window_grid: tuple[int, ...] = tuple(range(310, 621, 10))
    horizon: int = 1
    max_p: int = 5
    max_q: int = 5
    max_order: int = 5
    max_d: int = 2
    seasonal_period: int = 0
    seasonal_strength_threshold: float = 0.64
    alpha_gate: float = 0.01
    alpha_report: float = 0.05
    unit_root_alpha: float = 0.05
    seed: int = 0
    covariate_lag: int = 1
    jobs: int = 1
    run_diagnostics: bool = True
    gate_tests: tuple[str, ...] = ("ljung_box", "adf", "phillips_perron")
    white_hidden: int = 2
    log_gate: bool = True
    nzv_freq_ratio_cutoff: float = 19.0
    nzv_unique_pct_cutoff: float = 10.0
    skip_budget: float = 0.02
    gtol: float = 1e-8
    maxiter: int = 500
    report_detail_windows: tuple[int, ...] | None = None

    def __post_init__(self):
        grid = tuple(int(r) for r in self.window_grid)
        object.__setattr__(self, "window_grid", grid)
        object.__setattr__(self, "gate_tests", tuple(self.gate_tests))
        if self.report_detail_windows is not None:
            object.__setattr__(
                self, "report_detail_windows", tuple(int(r) for r in self.report_detail_windows)
            )
        if self.horizon != 1:
            raise ConfigError("only horizon 1 is supported")
        if not grid:
            raise ConfigError("window_grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("window_grid must be strictly ascending")
        if grid[0] < 32:
            raise ConfigError("window sizes below 32 cannot support order selection")
        if self.covariate_lag < 0:
            raise ConfigError("covariate_lag must be >= 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if not 0.0 < self.alpha_gate < 1.0 or not 0.0 < self.alpha_report < 1.0:
            raise ConfigError("significance levels must lie in (0, 1)")

    def detail_windows(self) -> tuple[int, ...]:
        """Window sizes whose plot data files are emitted (default: smallest,
        middle and largest of the grid)."""
        if self.report_detail_windows is not None:
            return self.report_detail_windows
        g = self.window_grid
        return tuple(sorted({g[0], g[len(g) // 2], g[-1]}))

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["window_grid"] = list(self.window_grid)
        d["gate_tests"] = list(self.gate_tests)
        if self.report_detail_windows is not None:
            d["report_detail_windows"] = list(self.report_detail_windows)
        return d

    @classmethod
    def from_json_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def override(self, **kwargs) -> "RunConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class SimSpec:
    """Synthetic panel generator settings.

    The target follows y_t = y_{t-1} + beta * x_{t-1} + eps_t with eps
    N(0, innovation_sd^2); x is a zero-mean AR(1) covariate with parameter
    ``covariate_phi`` and stationary standard deviation ``covariate_sd``.
    ``n_noise`` extra independent AR(1) covariates carry no signal.
    """

    T: int = 636
    beta: float = 0.0
    innovation_sd: float = 0.005
    covariate_phi: float = 0.7
    covariate_sd: float = 0.001
    n_noise: int = 0
    seed: int = 0
    level0: float = 0.26
    start_date: str = "2012-01-01"
    exp_levels: bool = False

    def __post_init__(self):
        if self.T < 50:
            raise ConfigError("SimSpec.T must be at least 50")
        if self.innovation_sd <= 0:
            raise ConfigError("innovation_sd must be positive")
        if not -1.0 < self.covariate_phi < 1.0:
            raise ConfigError("covariate_phi must lie in (-1, 1)")
        if self.covariate_sd <= 0:
            raise ConfigError("covariate_sd must be positive")
        if self.n_noise < 0:
            raise ConfigError("n_noise must be >= 0")

    @staticmethod
    def covariate_sd_for_r2_gain(beta: float, innovation_sd: float, r2_gain: float) -> float:
        """Stationary covariate s.d. giving a one-step R^2 gain of ``r2_gain``.

        The gain is beta^2 Var(x) / (beta^2 Var(x) + sigma^2), i.e. the share
        of the random-walk one-step forecast error variance a correctly
        specified regression removes.
        """
        if not 0.0 < r2_gain < 1.0:
            raise ConfigError("r2_gain must lie in (0, 1)")
        if beta == 0.0:
            raise ConfigError("r2_gain is undefined for beta = 0")
        var_x = innovation_sd**2 * r2_gain / (1.0 - r2_gain) / beta**2
        return float(var_x**0.5)

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, data: dict) -> "SimSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown simulation fields: {sorted(unknown)}")
        return cls(**data)
