"""CSV and JSON input/output.

Datasets are written with a header row (Y, D, optional U/V/W, then Z_1..Z_p)
and the case-sensitive 2-byte token ``NA`` for masked entries. Floats are
formatted with 17 significant digits so a write/read round trip reproduces
every value exactly. Headerless files are accepted with the positional
convention: first column Y, second D (or the instrument for IV estimands),
remaining columns covariates.
"""

from __future__ import annotations

import csv
import json
import sys
from contextlib import contextmanager
from typing import Optional

import numpy as np

from .corrupt import CorruptedDataset, CorruptionSpec
from .errors import DimensionError

SCHEMA_VERSION = 1

NA_TOKEN = "NA"

# Reserved (case-insensitive) header names for the non-covariate columns.
_SPECIAL_COLUMNS = {
    "y": "Y",
    "d": "D",
    "u": "instrument",
    "instrument": "instrument",
    "v": "V",
    "w": "weights",
    "weight": "weights",
    "weights": "weights",
}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@contextmanager
def _open_out(path):
    """Writable handle for a path, or stdout when path is None."""
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def write_dataset(path, ds: CorruptedDataset) -> None:
    """Write a dataset as CSV with NA for masked covariate entries."""
    header = []
    columns = []
    if ds.Y is not None:
        header.append("Y")
        columns.append(ds.Y)
    if ds.D is not None:
        header.append("D")
        columns.append(ds.D)
    if ds.instrument is not None:
        header.append("U")
        columns.append(ds.instrument)
    if ds.V is not None:
        header.append("V")
        columns.append(ds.V)
    if ds.weights is not None:
        header.append("W")
        columns.append(ds.weights)
    header.extend(f"Z_{j + 1}" for j in range(ds.p))
    with _open_out(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n):
            row = [_fmt(col[i]) for col in columns]
            row.extend(
                _fmt(ds.Z[i, j]) if ds.mask[i, j] else NA_TOKEN
                for j in range(ds.p)
            )
            writer.writerow(row)


def _is_header(row: list[str]) -> bool:
    for token in row:
        if token == NA_TOKEN:
            continue
        try:
            float(token)
        except ValueError:
            return True
    return False


def read_dataset(path, iv: bool = False) -> CorruptedDataset:
    """Read a dataset CSV; ``NA`` marks missing covariate entries.

    With a header, columns are classified by name (Y, D, U, V, W; everything
    else is a covariate, in file order). Without one, the positional
    convention applies; ``iv=True`` reads (Y, U, D, Z...) so IV estimands
    get their instrument.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise DimensionError(f"{path} is empty")
    if _is_header(rows[0]):
        header, body = rows[0], rows[1:]
    else:
        width = len(rows[0])
        if iv:
            names = ["Y", "U", "D"][: min(3, width)]
        else:
            names = ["Y", "D"][: min(2, width)]
        header = names + [f"Z_{j + 1}" for j in range(width - len(names))]
        body = rows
    if not body:
        raise DimensionError(f"{path} has no data rows")

    special: dict[str, int] = {}
    covariate_idx: list[int] = []
    for idx, name in enumerate(header):
        target = _SPECIAL_COLUMNS.get(name.strip().lower())
        if target is not None and target not in special:
            special[target] = idx
        else:
            covariate_idx.append(idx)
    if not covariate_idx:
        raise DimensionError("no covariate columns found")

    n = len(body)
    p = len(covariate_idx)
    Z = np.zeros((n, p))
    mask = np.ones((n, p), dtype=bool)
    vectors = {name: np.zeros(n) for name in special}
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise DimensionError(f"row {i + 2} has {len(row)} fields, expected {len(header)}")
        for name, idx in special.items():
            vectors[name][i] = float(row[idx])
        for j, idx in enumerate(covariate_idx):
            token = row[idx]
            if token == NA_TOKEN:
                Z[i, j] = np.nan
                mask[i, j] = False
            else:
                Z[i, j] = float(token)
    return CorruptedDataset(
        Z=Z,
        mask=mask,
        Y=vectors.get("Y"),
        D=vectors.get("D"),
        instrument=vectors.get("instrument"),
        V=vectors.get("V"),
        weights=vectors.get("weights"),
    )


def spec_to_dict(spec: CorruptionSpec) -> dict:
    rho = np.atleast_1d(np.asarray(spec.rho, dtype=float))
    return {
        "noise_kind": spec.noise_kind,
        "sigma_h": spec.sigma_h,
        "rho": rho[0] if rho.size == 1 else [float(v) for v in rho],
        "row_correlated": spec.row_correlated,
        "seed": spec.seed,
    }


def write_simulation_sidecar(path, ds: CorruptedDataset, spec: CorruptionSpec,
                             extra: Optional[dict] = None) -> None:
    """JSON sidecar carrying the truth and the generating spec."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "theta_true": ds.theta_true,
        "n": ds.n,
        "p": ds.p,
        "spec": spec_to_dict(spec),
    }
    if extra:
        payload.update(extra)
    with _open_out(path) as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_scree_csv(path, singular_values: np.ndarray) -> None:
    with _open_out(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "singular_value"])
        for idx, value in enumerate(np.asarray(singular_values, dtype=float), start=1):
            writer.writerow([idx, _fmt(value)])


def write_coverage_csv(path, rows) -> None:
    with _open_out(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "corruption", "k", "mean_theta", "mean_se",
                         "coverage", "reps_failed"])
        for row in rows:
            writer.writerow([row.cell, row.corruption, row.k, _fmt(row.mean_theta),
                             _fmt(row.mean_se), _fmt(row.coverage), row.reps_failed])


def write_studentized_csv(path, values: np.ndarray) -> None:
    with _open_out(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["rep", "studentized"])
        for idx, value in enumerate(np.asarray(values, dtype=float), start=1):
            writer.writerow([idx, _fmt(value)])


def result_to_json(result, config: Optional[dict] = None) -> str:
    payload = {"schema_version": SCHEMA_VERSION}
    payload.update(result.to_dict())
    if config:
        payload["config"] = config
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
