"""Laplace mechanism calibration for two publication regimes.

"Laplace(b)" means scale parameter b, i.e. density exp(-|x|/b)/(2b) with
variance 2 b^2. This differs from the corruption module's sigma_h
(standard deviation) convention; ``scale_to_sigma``/``sigma_to_scale``
convert between the two.

Central regime: each aggregate unit i publishes p sample means over L_i
individuals whose entries are bounded by A_bar_i; privacy loss eps is split
evenly across the p queries, giving per-unit noise scale 2 A_bar_i p /
(eps L_i). Micro regime: an individual's first T covariates, each bounded by
A_bar, are published with scale 2 A_bar T / eps. Both regimes report the
sub-exponential parameter bound sqrt(2) * scale that the inference theory
consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corrupt import CorruptedDataset
from .errors import ConfigurationError, DimensionError
from .rng import Stream, derive_rng


@dataclass(frozen=True)
class CentralDpSpec:
    """Aggregate-data release: per-unit entry bounds and unit sizes."""

    epsilon: float
    p: int
    A_bar: np.ndarray
    L: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A_bar", np.atleast_1d(np.asarray(self.A_bar, dtype=float)))
        object.__setattr__(self, "L", np.atleast_1d(np.asarray(self.L, dtype=float)))
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be > 0")
        if self.p < 1:
            raise ConfigurationError("p must be >= 1")
        if np.any(self.A_bar <= 0):
            raise ConfigurationError("all A_bar must be > 0")
        if np.any(self.L < 1):
            raise ConfigurationError("all L must be >= 1")
        if self.A_bar.shape != self.L.shape:
            raise DimensionError("A_bar and L must have the same length")


@dataclass(frozen=True)
class MicroDpSpec:
    """Microdata release: privatize the first T covariates, bounded by A_bar."""

    epsilon: float
    T: int
    A_bar: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be > 0")
        if self.T < 1:
            raise ConfigurationError("T must be >= 1")
        if not self.A_bar > 0:
            raise ConfigurationError("A_bar must be > 0")


def central_scale(spec: CentralDpSpec) -> np.ndarray:
    """Per-unit Laplace scale 2 A_bar_i p / (epsilon L_i)."""
    return 2.0 * spec.A_bar * spec.p / (spec.epsilon * spec.L)


def central_subexp_bound(spec: CentralDpSpec) -> tuple[float, float]:
    """Bound on (K_a, kappa): max_i 2^(3/2) A_bar_i p / (epsilon L_i)."""
    bound = float(np.max(2.0 ** 1.5 * spec.A_bar * spec.p / (spec.epsilon * spec.L)))
    return bound, bound


def micro_scale(spec: MicroDpSpec) -> float:
    """Laplace scale 2 A_bar T / epsilon."""
    return 2.0 * spec.A_bar * spec.T / spec.epsilon


def micro_subexp_bound(spec: MicroDpSpec) -> tuple[float, float]:
    """Bound on (K_a, kappa): 2^(3/2) A_bar T / epsilon."""
    bound = 2.0 ** 1.5 * spec.A_bar * spec.T / spec.epsilon
    return bound, bound


def scale_to_sigma(scale) -> np.ndarray | float:
    """Laplace scale b -> standard deviation sqrt(2) b."""
    return np.sqrt(2.0) * np.asarray(scale, dtype=float) if np.ndim(scale) else float(np.sqrt(2.0) * scale)


def sigma_to_scale(sigma) -> np.ndarray | float:
    """Standard deviation -> Laplace scale sigma / sqrt(2)."""
    return np.asarray(sigma, dtype=float) / np.sqrt(2.0) if np.ndim(sigma) else float(sigma / np.sqrt(2.0))


def p_over_L_diagnostic(spec: CentralDpSpec, n: int | None = None,
                        p: int | None = None) -> dict:
    """Advisory check that published variables do not swamp unit sizes.

    Compares max_i p / L_i with ln(n p); a ratio beyond the threshold means
    the induced noise parameters grow too fast for reliable downstream
    inference.
    """
    if n is None:
        n = int(spec.L.size)
    if p is None:
        p = spec.p
    max_ratio = float(np.max(p / spec.L))
    threshold = float(np.log(n * p))
    return {
        "max_p_over_L": max_ratio,
        "threshold_log_np": threshold,
        "passes": bool(max_ratio <= threshold),
    }


def privatize(X: np.ndarray, spec: CentralDpSpec | MicroDpSpec,
              seed: int) -> CorruptedDataset:
    """Add calibrated Laplace noise to a signal matrix (covariates only).

    Central specs perturb every entry with the unit's own scale; micro specs
    perturb only the first T columns and leave the rest bit-identical.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError("X must be 2-d")
    n, p = X.shape
    rng = derive_rng(seed, Stream.PRIVACY)
    if isinstance(spec, CentralDpSpec):
        if spec.L.size != n:
            raise DimensionError(f"spec has {spec.L.size} units, X has {n} rows")
        if spec.p != p:
            raise DimensionError(f"spec.p={spec.p} but X has {p} columns")
        scale = central_scale(spec)
        Z = X + rng.laplace(0.0, scale[:, None], size=(n, p))
    else:
        if spec.T > p:
            raise DimensionError(f"spec.T={spec.T} exceeds the {p} available columns")
        Z = X.copy()
        Z[:, :spec.T] = X[:, :spec.T] + rng.laplace(0.0, micro_scale(spec), size=(n, spec.T))
    return CorruptedDataset(Z=Z, mask=np.ones_like(Z, dtype=bool))
