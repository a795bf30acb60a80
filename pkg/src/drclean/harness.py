"""Monte Carlo experiment runner: coverage tables over corruption grids.

Each cell simulates ``reps`` datasets, runs the cross-fitted estimator on
every one, and aggregates point estimates, standard errors, and coverage of
the known truth. Replications derive independent Philox streams from
``cell_seed XOR rep_index`` and are embarrassingly parallel; BLAS threading
is pinned to one thread inside the runner so results are bit-identical no
matter how many workers execute the cell.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .corrupt import (
    THETA_TRUE,
    CorruptedDataset,
    CorruptionSpec,
    sigma_for_noise_ratio,
    simulate_dgp,
)
from .dr import cross_fit_estimate
from .errors import ConfigurationError
from .estimands import Ate, Estimand
from .rng import replication_seed

# Cells whose failure fraction exceeds this are flagged with a warning.
_FAILURE_FLAG_FRACTION = 0.02

_SEED_MIX = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class CellConfig:
    """One grid cell: a DGP, a corruption, a cleaning rank, and a seed."""

    n: int
    p: int
    r: int
    spec: CorruptionSpec
    k: int
    reps: int
    seed: int
    estimand: Estimand = field(default_factory=Ate)
    folds: int = 2
    method: str = "dr"
    label: str = ""

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigurationError("reps must be >= 1")
        if not 1 <= self.k <= min(self.n, self.p):
            raise ConfigurationError("need 1 <= k <= min(n, p)")
        if self.method not in ("dr", "ols"):
            raise ConfigurationError("method must be 'dr' or 'ols'")


@dataclass(frozen=True)
class RepRecord:
    """Outcome of a single replication."""

    rep: int
    theta_hat: float = np.nan
    se: float = np.nan
    ci_low: float = np.nan
    ci_high: float = np.nan
    failed: bool = False
    error: str = ""


@dataclass(frozen=True)
class CoverageRow:
    """Aggregated summary of one cell."""

    cell: str
    corruption: str
    k: int
    mean_theta: float
    mean_se: float
    coverage: float
    reps_failed: int


@dataclass
class ExperimentConfig:
    """A grid: the cartesian product of corruption specs and k values."""

    n: int
    p: int
    r: int
    corruptions: list
    corruption_labels: list
    k_values: list
    reps: int
    base_seed: int
    estimand: Estimand = field(default_factory=Ate)
    folds: int = 2
    method: str = "dr"
    max_workers: int = 1


def cell_seed(base_seed: int, index: int) -> int:
    """Independent deterministic seed for grid cell ``index``."""
    return (int(base_seed) ^ (((index + 1) * _SEED_MIX) & _MASK64)) & _MASK64


def _plain_ols_theta(ds: CorruptedDataset) -> float:
    """Treatment coefficient from OLS of Y on (1, D, Z with NA as 0).

    Contrast-only: run directly on the corrupted covariates, no cleaning and
    no inference.
    """
    Z0 = np.where(ds.mask, ds.Z, 0.0)
    design = np.column_stack([np.ones(ds.n), ds.D, Z0])
    coef, *_ = np.linalg.lstsq(design, ds.Y, rcond=None)
    return float(coef[1])


def _run_rep(cell: CellConfig, t: int) -> RepRecord:
    seed = replication_seed(cell.seed, t)
    try:
        ds = simulate_dgp(cell.n, cell.p, cell.r, cell.spec, seed)
        if cell.method == "ols":
            return RepRecord(rep=t, theta_hat=_plain_ols_theta(ds))
        res = cross_fit_estimate(ds, cell.estimand, k=cell.k, L=cell.folds, seed=seed)
        return RepRecord(
            rep=t,
            theta_hat=res.theta_hat,
            se=res.standard_error,
            ci_low=res.ci_low,
            ci_high=res.ci_high,
        )
    except Exception as exc:  # per-rep failures never abort the cell
        return RepRecord(rep=t, failed=True, error=f"{type(exc).__name__}: {exc}")


def run_cell_detailed(cell: CellConfig,
                      max_workers: int = 1) -> tuple[CoverageRow, list[RepRecord]]:
    """Run all replications of a cell and aggregate; also return the records.

    Aggregation uses the ordered per-rep records, so merging record shards
    from separate partial runs reproduces the same row exactly.
    """
    reps = range(1, cell.reps + 1)
    with threadpool_limits(limits=1):
        if max_workers <= 1:
            records = [_run_rep(cell, t) for t in reps]
        else:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                records = list(pool.map(lambda t: _run_rep(cell, t), reps))
    return aggregate_records(cell, records), records


def run_cell(cell: CellConfig, max_workers: int = 1) -> CoverageRow:
    row, _ = run_cell_detailed(cell, max_workers=max_workers)
    return row


def aggregate_records(cell: CellConfig, records: list) -> CoverageRow:
    ok = [rec for rec in records if not rec.failed]
    failed = len(records) - len(ok)
    if failed > _FAILURE_FLAG_FRACTION * len(records):
        warnings.warn(
            f"cell {cell.label or cell.k}: {failed}/{len(records)} replications failed",
            RuntimeWarning,
        )
    if not ok:
        return CoverageRow(cell.label, cell.label, cell.k,
                           np.nan, np.nan, np.nan, failed)
    theta = np.array([rec.theta_hat for rec in ok])
    se = np.array([rec.se for rec in ok])
    if cell.method == "ols":
        coverage = np.nan
        mean_se = np.nan
    else:
        covered = [(rec.ci_low <= THETA_TRUE <= rec.ci_high) for rec in ok]
        coverage = float(sum(covered) / len(ok))
        mean_se = float(se.mean())
    return CoverageRow(
        cell=cell.label or f"k={cell.k}",
        corruption=cell.label,
        k=cell.k,
        mean_theta=float(theta.mean()),
        mean_se=mean_se,
        coverage=coverage,
        reps_failed=failed,
    )


def grid_cells(config: ExperimentConfig) -> list[CellConfig]:
    """Materialize the grid in deterministic order: corruption outer, k inner."""
    cells = []
    index = 0
    for spec, label in zip(config.corruptions, config.corruption_labels):
        for k in config.k_values:
            cells.append(CellConfig(
                n=config.n, p=config.p, r=config.r, spec=spec, k=k,
                reps=config.reps, seed=cell_seed(config.base_seed, index),
                estimand=config.estimand, folds=config.folds,
                method=config.method, label=label,
            ))
            index += 1
    return cells


def run_grid(config: ExperimentConfig) -> list[CoverageRow]:
    return [run_cell(cell, max_workers=config.max_workers)
            for cell in grid_cells(config)]


def studentize(records: list, theta0: float) -> np.ndarray:
    """(theta_hat - theta0) / standard error for every successful rep."""
    ok = [rec for rec in records if not rec.failed]
    return np.array([(rec.theta_hat - theta0) / rec.se for rec in ok])


def studentized_dump(cell: CellConfig, max_workers: int = 1) -> np.ndarray:
    """Run a cell and return the studentized point estimates per rep."""
    _, records = run_cell_detailed(cell, max_workers=max_workers)
    return studentize(records, THETA_TRUE)


def parse_experiment_config(raw: dict) -> ExperimentConfig:
    """Build a grid config from the documented JSON schema.

    Required keys: n, p, r, reps, base_seed, k_values, corruptions (a list
    of objects with ``noise`` plus either ``ratio`` or ``sigma``, and
    optional ``missing`` and ``row_correlated``). Optional keys: folds,
    method ("dr" or "ols"), max_workers. The simulated design targets the
    average treatment effect, so the estimand is fixed to ATE.
    """
    required = ("n", "p", "r", "reps", "base_seed", "k_values", "corruptions")
    missing_keys = [key for key in required if key not in raw]
    if missing_keys:
        raise ConfigurationError(f"experiment config is missing keys: {missing_keys}")
    if raw.get("estimand", "ate") != "ate":
        raise ConfigurationError("the simulated design only supports estimand 'ate'")
    n, p, r = int(raw["n"]), int(raw["p"]), int(raw["r"])
    specs, labels = [], []
    for entry in raw["corruptions"]:
        noise = entry.get("noise", "none")
        if noise == "discretize":
            noise = "discretize_poisson"
        if "sigma" in entry:
            sigma = float(entry["sigma"])
        else:
            sigma = sigma_for_noise_ratio(float(entry.get("ratio", 0.0)), r)
        missing = float(entry.get("missing", 0.0))
        if not 0.0 <= missing < 1.0:
            raise ConfigurationError("missing fraction must lie in [0, 1)")
        spec = CorruptionSpec(
            noise_kind=noise,
            sigma_h=sigma,
            rho=1.0 - missing,
            row_correlated=bool(entry.get("row_correlated", False)),
        )
        specs.append(spec)
        labels.append(entry.get(
            "label",
            f"{noise}:sigma={sigma:g},missing={missing:g}",
        ))
    k_values = [int(k) for k in raw["k_values"]]
    for k in k_values:
        if not 1 <= k <= min(n, p):
            raise ConfigurationError(f"k={k} outside [1, min(n, p)]")
    return ExperimentConfig(
        n=n, p=p, r=r,
        corruptions=specs,
        corruption_labels=labels,
        k_values=k_values,
        reps=int(raw["reps"]),
        base_seed=int(raw["base_seed"]),
        estimand=Ate(),
        folds=int(raw.get("folds", 2)),
        method=raw.get("method", "dr"),
        max_workers=int(raw.get("max_workers", 1)),
    )
