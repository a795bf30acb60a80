"""Causal estimand catalog.

Each estimand pins down two things: the compatible dictionary layout, and the
per-row counterfactual moment vector m_i whose train-fold mean drives the
balancing coefficient and whose evaluation on a filled test row gives the
plug-in part of the influence score. The moment vector is the only piece of
the pipeline that changes across estimands.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dictionary import Dictionary, apply_d_derivative
from .errors import ConfigurationError, DimensionError, EmptyKernelWindowError

KERNELS = ("gaussian", "epanechnikov")


def kernel_weights(V: np.ndarray, v: float, h: float, kernel: str = "gaussian") -> np.ndarray:
    """Kernel weights K((V_i - v)/h) normalized by their in-fold mean.

    The returned weights average exactly one, so a flat kernel (h = inf)
    leaves every observation with weight one.
    """
    if not h > 0:
        raise ConfigurationError("bandwidth h must be > 0")
    if kernel not in KERNELS:
        raise ConfigurationError(f"kernel must be one of {KERNELS}")
    V = np.asarray(V, dtype=float)
    u = (V - v) / h
    if kernel == "gaussian":
        raw = np.exp(-0.5 * u**2) / np.sqrt(2.0 * np.pi)
    else:
        raw = 0.75 * np.maximum(1.0 - u**2, 0.0)
    mean = raw.mean()
    if mean <= 0.0:
        raise EmptyKernelWindowError(
            f"no observations within kernel reach of v={v} (h={h})"
        )
    if np.all(raw == raw.flat[0]):
        # Constant kernel values normalize to exactly one; avoids rounding
        # in the degenerate all-equal case (e.g. h = inf).
        return np.ones_like(raw)
    return raw / mean


@dataclass(frozen=True, eq=False)
class Estimand:
    """Base class; use the concrete subclasses below."""

    tag = "abstract"
    dictionary_kind = ""
    is_ratio = False
    needs_treatment = True
    needs_instrument = False
    needs_localizer = False


@dataclass(frozen=True, eq=False)
class Ate(Estimand):
    """Average treatment effect of a binary treatment."""

    tag = "ate"
    dictionary_kind = "interacted"


@dataclass(frozen=True, eq=False)
class PolicyAffine(Estimand):
    """Average effect of transporting covariates by x -> t1 * x + t2."""

    t1: np.ndarray = field(default=None)
    t2: np.ndarray = field(default=None)

    tag = "policy"
    dictionary_kind = "identity"
    needs_treatment = False

    def vectors(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        t1 = np.ones(p) if self.t1 is None else np.asarray(self.t1, dtype=float)
        t2 = np.zeros(p) if self.t2 is None else np.asarray(self.t2, dtype=float)
        if t1.size == 1:
            t1 = np.full(p, t1.item())
        if t2.size == 1:
            t2 = np.full(p, t2.item())
        if t1.shape != (p,) or t2.shape != (p,):
            raise DimensionError("policy vectors t1, t2 must have length p")
        return t1, t2


@dataclass(frozen=True, eq=False)
class AverageDerivative(Estimand):
    """Average derivative of the regression in a continuous treatment."""

    tag = "derivative"
    dictionary_kind = "quadratic_interacted"


@dataclass(frozen=True, eq=False)
class PartiallyLinear(Estimand):
    """Partially linear regression coefficient; unit weights optional."""

    tag = "plinear"
    dictionary_kind = "partially_linear"


@dataclass(frozen=True, eq=False)
class Pliv(Estimand):
    """Partially linear IV coefficient: ratio of two partially linear runs
    with the instrument in the treatment slot."""

    tag = "pliv"
    dictionary_kind = "partially_linear"
    is_ratio = True
    needs_instrument = True


@dataclass(frozen=True, eq=False)
class Late(Estimand):
    """Local average treatment effect: ratio of reduced-form and first-stage
    effects of a binary instrument."""

    tag = "late"
    dictionary_kind = "interacted"
    is_ratio = True
    needs_instrument = True


@dataclass(frozen=True, eq=False)
class LocalizedAte(Estimand):
    """ATE localized at V = v through a kernel with bandwidth h.

    Kernel weights are normalized to mean one within each fold; h = inf
    makes every weight exactly one and reproduces the plain ATE.
    """

    v: float = 0.0
    h: float = 1.0
    kernel: str = "gaussian"

    tag = "localized-ate"
    dictionary_kind = "interacted"
    needs_localizer = True

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigurationError("bandwidth h must be > 0")
        if self.kernel not in KERNELS:
            raise ConfigurationError(f"kernel must be one of {KERNELS}")


ESTIMAND_TAGS = ("ate", "policy", "derivative", "plinear", "pliv", "late",
                 "localized-ate")


def check_dictionary(estimand: Estimand, dictionary: Dictionary) -> None:
    if dictionary.kind != estimand.dictionary_kind:
        raise ConfigurationError(
            f"estimand {estimand.tag!r} requires the {estimand.dictionary_kind!r} "
            f"dictionary, got {dictionary.kind!r}"
        )


def moment_rows(estimand: Estimand, dictionary: Dictionary,
                D: np.ndarray | None, X: np.ndarray) -> np.ndarray:
    """Per-row counterfactual moment vectors, one row per observation.

    ``X`` is either the cleaned training matrix (moment estimation) or the
    filled test rows (score evaluation); the layout is identical.
    """
    check_dictionary(estimand, dictionary)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != dictionary.p_in:
        raise DimensionError(f"X has shape {X.shape}, expected (n, {dictionary.p_in})")
    n = X.shape[0]
    if isinstance(estimand, (Ate, Late, LocalizedAte)):
        return np.hstack([X, -X])
    if isinstance(estimand, PolicyAffine):
        t1, t2 = estimand.vectors(X.shape[1])
        return (t1 - 1.0) * X + t2
    if isinstance(estimand, AverageDerivative):
        if D is None:
            raise DimensionError("average derivative needs the treatment vector")
        return apply_d_derivative(dictionary, np.asarray(D, dtype=float), X)
    if isinstance(estimand, (PartiallyLinear, Pliv)):
        rows = np.zeros((n, dictionary.p_out))
        rows[:, 0] = 1.0
        return rows
    raise ConfigurationError(f"unsupported estimand {type(estimand).__name__}")
