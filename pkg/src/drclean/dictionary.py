"""Technical-regressor dictionaries: map (treatment, covariate row) to a
basis row that is at most linear in the corrupted covariates.

Four layouts are supported. Column order is fixed and defines coefficient
indexing everywhere downstream:

    identity              x                                  (p)
    interacted            (d*x, (1-d)*x)                     (2p)
    partially_linear      (d, x)                             (1+p)
    quadratic_interacted  (1, d, d^2, x, d*x, d^2*x)         (3+3p)

Nonlinearity only ever enters through the uncorrupted treatment, so additive
covariate noise is never compounded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError

DICTIONARY_KINDS = ("identity", "interacted", "partially_linear", "quadratic_interacted")

# Maximum polynomial degree per layout (degree in (d, x) jointly).
_D_MAX = {
    "identity": 1,
    "interacted": 2,
    "partially_linear": 1,
    "quadratic_interacted": 3,
}


@dataclass(frozen=True)
class Dictionary:
    kind: str
    p_in: int

    def __post_init__(self):
        if self.kind not in DICTIONARY_KINDS:
            raise ConfigurationError(
                f"unknown dictionary kind {self.kind!r}; expected one of {DICTIONARY_KINDS}"
            )
        if self.p_in < 1:
            raise ConfigurationError("p_in must be >= 1")

    @property
    def p_out(self) -> int:
        p = self.p_in
        return {
            "identity": p,
            "interacted": 2 * p,
            "partially_linear": 1 + p,
            "quadratic_interacted": 3 + 3 * p,
        }[self.kind]

    @property
    def d_max(self) -> int:
        return _D_MAX[self.kind]


def apply(dictionary: Dictionary, d: float, x: np.ndarray) -> np.ndarray:
    """Basis row for a single observation."""
    x = np.asarray(x, dtype=float)
    if x.shape != (dictionary.p_in,):
        raise DimensionError(f"x has shape {x.shape}, expected ({dictionary.p_in},)")
    return apply_matrix(dictionary, np.asarray([d], dtype=float), x[None, :])[0]


def apply_matrix(dictionary: Dictionary, D: np.ndarray | None,
                 X: np.ndarray) -> np.ndarray:
    """Row-wise basis map for a whole matrix.

    ``D`` may be None for the identity layout, which ignores the treatment.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != dictionary.p_in:
        raise DimensionError(f"X has shape {X.shape}, expected (n, {dictionary.p_in})")
    kind = dictionary.kind
    if kind == "identity":
        return X.copy()
    if D is None:
        raise DimensionError(f"dictionary kind {kind!r} requires a treatment vector")
    D = np.asarray(D, dtype=float)
    if D.shape != (X.shape[0],):
        raise DimensionError("D length must match the number of rows of X")
    d = D[:, None]
    if kind == "interacted":
        return np.hstack([d * X, (1.0 - d) * X])
    if kind == "partially_linear":
        return np.hstack([d, X])
    ones = np.ones_like(d)
    return np.hstack([ones, d, d**2, X, d * X, d**2 * X])


def apply_d_derivative(dictionary: Dictionary, D: np.ndarray,
                       X: np.ndarray) -> np.ndarray:
    """Row-wise analytic derivative of the basis row in the treatment."""
    X = np.asarray(X, dtype=float)
    D = np.asarray(D, dtype=float)
    if X.ndim != 2 or X.shape[1] != dictionary.p_in:
        raise DimensionError(f"X has shape {X.shape}, expected (n, {dictionary.p_in})")
    if D.shape != (X.shape[0],):
        raise DimensionError("D length must match the number of rows of X")
    kind = dictionary.kind
    d = D[:, None]
    if kind == "identity":
        return np.zeros_like(X)
    if kind == "interacted":
        return np.hstack([X, -X])
    if kind == "partially_linear":
        return np.hstack([np.ones_like(d), np.zeros_like(X)])
    zeros = np.zeros_like(d)
    return np.hstack([zeros, np.ones_like(d), 2.0 * d,
                      np.zeros_like(X), X, 2.0 * d * X])


def covariate_slot_scale(dictionary: Dictionary, factors: np.ndarray) -> np.ndarray:
    """Per-slot multipliers turning b(d, x * factors) into b(d, x) * scale.

    Each basis slot is either a pure-treatment term (scale 1) or linear in
    exactly one covariate x_j (scale factors_j). Used to absorb the inverse
    observation rates into a fitted coefficient vector so per-row prediction
    is a single dot product on the zero-filled raw row.
    """
    factors = np.asarray(factors, dtype=float)
    if factors.shape != (dictionary.p_in,):
        raise DimensionError("factors length must match p_in")
    kind = dictionary.kind
    if kind == "identity":
        return factors.copy()
    if kind == "interacted":
        return np.concatenate([factors, factors])
    if kind == "partially_linear":
        return np.concatenate([[1.0], factors])
    return np.concatenate([[1.0, 1.0, 1.0], factors, factors, factors])
