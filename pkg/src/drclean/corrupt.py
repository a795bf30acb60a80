"""Synthetic low-rank signals and the four covariate corruption channels.

The observation model throughout the package is

    Z = (X + H) * pi

entrywise: a low-rank signal matrix ``X`` plus additive noise ``H``
(Gaussian, Laplace, or randomized-rounding discretization), masked by a
missingness indicator ``pi`` that keeps column ``j`` with probability
``rho_j``. Masked entries are stored as NaN and carried alongside an explicit
boolean mask; downstream code must consult the mask and never read the NaN
sentinels.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DimensionError
from .rng import Stream, derive_rng

# Simulation design constants: treatment effect, signal loading on the
# outcome, propensity index scale, and the truncated-logistic floor/ceiling.
THETA_TRUE = 2.2
_OUTCOME_SIGNAL_LOADING = 1.2
_PROPENSITY_SCALE = 0.25
_LOGISTIC_FLOOR = 0.05
_LOGISTIC_CEILING = 0.95

NOISE_KINDS = ("none", "gaussian", "laplace", "discretize_poisson")

# Memory cap (entries) per chunk for vectorized Monte Carlo draws.
_CHUNK_ENTRIES = 4_000_000


@dataclass(frozen=True)
class SignalMatrix:
    """An n x p matrix generated with known factor rank."""

    values: np.ndarray
    rank_r: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class CorruptionSpec:
    """Which noise to add and how much to mask.

    Parameters
    ----------
    noise_kind : one of ``NOISE_KINDS``
    sigma_h : float
        Standard deviation of the additive noise. For the Laplace kind the
        scale parameter is ``sigma_h / sqrt(2)`` so the variance is
        ``sigma_h**2``. Ignored for "none" and "discretize_poisson".
    rho : float or array
        Per-column probability of observing an entry, each in (0, 1].
        A scalar is broadcast to all columns.
    row_correlated : bool
        If True, draw a shared Bernoulli(1/2) factor per row and shift the
        observation probability to ``max(2*rho_j - 1, 0)`` when the factor is
        1 and ``min(2*rho_j, 1)`` when it is 0. The marginal stays ``rho_j``
        while entries within a row become positively dependent. This is one
        admissible dependent-missingness generator, not a canonical one;
        the default is independent MCAR.
    seed : int
        64-bit seed; noise and mask use separate derived streams.
    """

    noise_kind: str = "none"
    sigma_h: float = 0.0
    rho: float | np.ndarray = 1.0
    row_correlated: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.noise_kind not in NOISE_KINDS:
            raise ConfigurationError(
                f"unknown noise_kind {self.noise_kind!r}; expected one of {NOISE_KINDS}"
            )
        if self.sigma_h < 0:
            raise ConfigurationError("sigma_h must be >= 0")
        rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        if np.any(rho <= 0.0) or np.any(rho > 1.0):
            raise ConfigurationError("every observation probability rho_j must lie in (0, 1]")

    def rho_vector(self, p: int) -> np.ndarray:
        """Observation probabilities broadcast to length p."""
        rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        if rho.size == 1:
            return np.full(p, rho[0])
        if rho.size != p:
            raise DimensionError(f"rho has length {rho.size}, expected {p}")
        return rho.copy()


@dataclass
class CorruptedDataset:
    """Observed data: outcome, treatment, corrupted covariates with mask.

    ``Z`` holds NaN wherever ``mask`` is False; those entries must never be
    read as values. ``instrument`` is only set for IV estimands (LATE and
    partially linear IV), ``weights`` for weighted estimands, and ``V`` for
    kernel-localized estimands. ``theta_true`` is known only for simulated
    data.
    """

    Z: np.ndarray
    mask: np.ndarray
    Y: Optional[np.ndarray] = None
    D: Optional[np.ndarray] = None
    instrument: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    V: Optional[np.ndarray] = None
    theta_true: Optional[float] = None

    def __post_init__(self):
        self.Z = np.asarray(self.Z, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.Z.ndim != 2:
            raise DimensionError("Z must be a 2-d matrix")
        if self.mask.shape != self.Z.shape:
            raise DimensionError("mask shape must match Z")
        if not np.all(np.isfinite(self.Z[self.mask])):
            raise DimensionError("Z must be finite wherever mask is True")
        n = self.Z.shape[0]
        for name in ("Y", "D", "instrument", "weights", "V"):
            vec = getattr(self, name)
            if vec is None:
                continue
            vec = np.asarray(vec, dtype=float)
            if vec.shape != (n,):
                raise DimensionError(f"{name} must have shape ({n},)")
            setattr(self, name, vec)

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def p(self) -> int:
        return self.Z.shape[1]

    def take(self, idx: np.ndarray) -> "CorruptedDataset":
        """Row subset (used for fold splitting)."""

        def sub(v):
            return None if v is None else v[idx]

        return CorruptedDataset(
            Z=self.Z[idx],
            mask=self.mask[idx],
            Y=sub(self.Y),
            D=sub(self.D),
            instrument=sub(self.instrument),
            weights=sub(self.weights),
            V=sub(self.V),
            theta_true=self.theta_true,
        )


def generate_factor_signal(n: int, p: int, r: int, seed: int) -> SignalMatrix:
    """Draw X = U V^T with U ~ N(0,1) n x r and V ~ N(0,1) p x r.

    Entries have mean zero and variance r. The matrix has rank at most r
    (exactly r almost surely).
    """
    if n < 1 or p < 1:
        raise DimensionError("n and p must be positive")
    if not 1 <= r <= min(n, p):
        raise DimensionError(f"need 1 <= r <= min(n, p); got r={r}, n={n}, p={p}")
    rng = derive_rng(seed, Stream.SIGNAL)
    U = rng.standard_normal((n, r))
    V = rng.standard_normal((p, r))
    return SignalMatrix(values=U @ V.T, rank_r=r)


def _draw_noisy(values: np.ndarray, spec: CorruptionSpec, rng: np.random.Generator,
                size=None) -> np.ndarray:
    """X + H for one draw of H (or a stack of draws when size is given)."""
    shape = values.shape if size is None else size
    kind = spec.noise_kind
    if kind == "none":
        return np.broadcast_to(values, shape).copy()
    if kind == "gaussian":
        return values + rng.normal(0.0, spec.sigma_h, size=shape)
    if kind == "laplace":
        return values + rng.laplace(0.0, spec.sigma_h / np.sqrt(2.0), size=shape)
    # Randomized rounding: sign(X) * Poisson(|X|); exactly zero stays zero.
    draws = rng.poisson(np.broadcast_to(np.abs(values), shape)).astype(float)
    return np.sign(values) * draws


def _draw_mask(n: int, rho: np.ndarray, row_correlated: bool,
               rng: np.random.Generator) -> np.ndarray:
    p = rho.size
    if not row_correlated:
        return rng.random((n, p)) < rho[None, :]
    factor = rng.random(n) < 0.5
    hi = np.minimum(2.0 * rho, 1.0)
    lo = np.maximum(2.0 * rho - 1.0, 0.0)
    prob = np.where(factor[:, None], lo[None, :], hi[None, :])
    return rng.random((n, p)) < prob


def _corrupt_values(values: np.ndarray, spec: CorruptionSpec,
                    rng_noise: np.random.Generator,
                    rng_mask: np.random.Generator) -> CorruptedDataset:
    noisy = _draw_noisy(values, spec, rng_noise)
    mask = _draw_mask(values.shape[0], spec.rho_vector(values.shape[1]),
                      spec.row_correlated, rng_mask)
    Z = np.where(mask, noisy, np.nan)
    return CorruptedDataset(Z=Z, mask=mask)


def corrupt(X: SignalMatrix, spec: CorruptionSpec) -> CorruptedDataset:
    """Apply Z = (X + H) * pi using the spec's seed (covariates only)."""
    values = X.values if isinstance(X, SignalMatrix) else np.asarray(X, dtype=float)
    return _corrupt_values(
        values, spec,
        derive_rng(spec.seed, Stream.NOISE),
        derive_rng(spec.seed, Stream.MASK),
    )


def conditional_mean_check(X: SignalMatrix, spec: CorruptionSpec,
                           reps: int) -> np.ndarray:
    """Entrywise Monte Carlo mean of H = (X + H) - X over ``reps`` draws.

    Validates that each noise kind is conditionally mean zero; the estimate
    concentrates at rate 1/sqrt(reps).
    """
    if reps < 1:
        raise ConfigurationError("reps must be >= 1")
    values = X.values if isinstance(X, SignalMatrix) else np.asarray(X, dtype=float)
    rng = derive_rng(spec.seed, Stream.NOISE)
    total = np.zeros_like(values)
    chunk = max(1, _CHUNK_ENTRIES // values.size)
    done = 0
    while done < reps:
        b = min(chunk, reps - done)
        noisy = _draw_noisy(values, spec, rng, size=(b,) + values.shape)
        total += (noisy - values).sum(axis=0)
        done += b
    return total / reps


def truncated_logistic(t: np.ndarray) -> np.ndarray:
    """0.90 * exp(t)/(1+exp(t)) + 0.05, elementwise and overflow-safe.

    Values lie in (0.05, 0.95), bounding propensities away from 0 and 1.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return (_LOGISTIC_CEILING - _LOGISTIC_FLOOR) * out + _LOGISTIC_FLOOR


def simulate_dgp(n: int, p: int, r: int, spec: CorruptionSpec,
                 seed: int) -> CorruptedDataset:
    """Full simulation design: factor signal, logistic treatment, linear
    outcome with heterogeneity on the first covariate, then corruption.

    beta_j = j^(-2); D ~ Bernoulli(logistic(0.25 X beta) truncated to
    [0.05, 0.95]); Y = 2.2 D + 1.2 X beta + D X_1 + N(0,1). The average
    treatment effect is 2.2 by construction (E[X_1] = 0).

    ``seed`` drives every stream, including the corruption draw; the spec's
    own seed field is honored only by direct ``corrupt`` calls. Replications
    with distinct seeds therefore get independent corruption.
    """
    if n < 2 or p < 2:
        raise DimensionError("need n >= 2 and p >= 2")
    if r > min(n, p):
        raise DimensionError("need r <= min(n, p)")
    X = generate_factor_signal(n, p, r, seed)
    beta = np.arange(1, p + 1, dtype=float) ** -2.0
    index = X.values @ beta
    propensity = truncated_logistic(_PROPENSITY_SCALE * index)
    D = (derive_rng(seed, Stream.TREATMENT).random(n) < propensity).astype(float)
    eps = derive_rng(seed, Stream.OUTCOME).standard_normal(n)
    Y = THETA_TRUE * D + _OUTCOME_SIGNAL_LOADING * index + D * X.values[:, 0] + eps
    ds = _corrupt_values(
        X.values, spec,
        derive_rng(seed, Stream.NOISE),
        derive_rng(seed, Stream.MASK),
    )
    return replace(ds, Y=Y, D=D, theta_true=THETA_TRUE)


def sigma_for_noise_ratio(ratio: float, r: int) -> float:
    """Noise standard deviation for a target noise-to-signal variance ratio.

    The factor signal has entrywise variance r, so ratio = sigma_h^2 / r.
    """
    if ratio < 0:
        raise ConfigurationError("noise-to-signal ratio must be >= 0")
    return float(np.sqrt(ratio * r))
