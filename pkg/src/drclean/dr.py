"""Cross-fitted doubly robust estimation: influence scores, point estimate,
variance, and the data cleaning-adjusted confidence interval.

For each fold, cleaning, regression, and balancing are learned on the
complement and evaluated on the fold's raw rows. The un-centered score of a
row is

    psi_i = m(w_i, gamma_hat) + alpha_hat(w_i) * (y_i - gamma_hat(w_i))

with the plug-in part m evaluated through the estimand's moment layout on
the zero-filled, rate-rescaled row. The estimate is the mean of the pooled
scores, the variance their population variance (1/n divisor), and the
interval theta_hat +/- 1.96 sigma_hat / sqrt(n). Ratio estimands (LATE,
partially linear IV) run outcome and treatment pipelines on the same folds
and combine them with a delta-method variance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cleaning import fill, fit_cleaning
from .corrupt import CorruptedDataset
from .dictionary import Dictionary, apply_matrix
from .errors import ConfigurationError, DimensionError, WeakInstrumentError
from .estimands import (
    Ate,
    AverageDerivative,
    Estimand,
    Late,
    LocalizedAte,
    PartiallyLinear,
    Pliv,
    PolicyAffine,
    check_dictionary,
    kernel_weights,
    moment_rows,
)
from .eiv import (
    EivFit,
    PINV_RTOL,
    balance_report,
    counterfactual_moment,
    fit_balance,
    fit_regression,
)
from .rng import Stream, derive_rng

# Two-sided 95% normal critical value, fixed by the interval definition.
Z_CRITICAL = 1.96

# |denominator| below this is treated as a weak instrument.
WEAK_DENOMINATOR_TOL = 1e-10


@dataclass
class InferenceResult:
    """Point estimate, variance, confidence interval, and diagnostics.

    ``psi`` stores the un-centered scores, so ``mean(psi) == theta_hat`` by
    construction and ``sigma_hat**2 == mean(psi**2) - theta_hat**2``.
    """

    theta_hat: float
    sigma_hat: float
    ci_low: float
    ci_high: float
    n: int
    psi: np.ndarray
    fold_diagnostics: list = field(default_factory=list)

    @property
    def standard_error(self) -> float:
        return self.sigma_hat / np.sqrt(self.n)

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat,
            "sigma_hat": self.sigma_hat,
            "standard_error": self.standard_error,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "n": self.n,
            "fold_diagnostics": self.fold_diagnostics,
            "psi": [float(v) for v in self.psi],
        }


def summarize_scores(psi: np.ndarray) -> tuple[float, float]:
    """Mean and population standard deviation (1/n divisor) of the scores."""
    psi = np.asarray(psi, dtype=float)
    theta = float(psi.mean())
    sigma = float(np.sqrt(np.mean((psi - theta) ** 2)))
    return theta, sigma


def _result_from_scores(psi: np.ndarray, fold_diagnostics: list) -> InferenceResult:
    theta, sigma = summarize_scores(psi)
    half = Z_CRITICAL * sigma / np.sqrt(psi.size)
    return InferenceResult(
        theta_hat=theta,
        sigma_hat=sigma,
        ci_low=theta - half,
        ci_high=theta + half,
        n=int(psi.size),
        psi=np.asarray(psi, dtype=float),
        fold_diagnostics=fold_diagnostics,
    )


def influence_score(estimand: Estimand, gamma_fit: EivFit, alpha_fit: EivFit,
                    y: float, d: float | None, z: np.ndarray,
                    mask_row: np.ndarray | None = None,
                    ell: float = 1.0, unit_weight: float = 1.0) -> float:
    """Un-centered doubly robust score for one raw test row.

    ``ell`` is the kernel localization weight (localized estimands only) and
    ``unit_weight`` the known aggregate-unit weight (weighted estimands
    only). For ratio estimands this scores a single component: pass the
    component's outcome and fits.
    """
    z = np.asarray(z, dtype=float)
    if mask_row is None:
        mask_row = np.isfinite(z)
    mask_row = np.asarray(mask_row, dtype=bool)
    dictionary = gamma_fit.dictionary
    check_dictionary(estimand, dictionary)
    fz = fill(z[None, :], mask_row[None, :], gamma_fit.cleaning.rho_hat)
    D = None if d is None else np.asarray([d], dtype=float)
    basis = apply_matrix(dictionary, D, fz)[0]
    gamma = float(basis @ gamma_fit.coef)
    alpha = float(basis @ alpha_fit.coef)
    m_part = float(moment_rows(estimand, dictionary, D, fz)[0] @ gamma_fit.coef)
    return unit_weight * (ell * m_part + alpha * (y - gamma))


@dataclass
class _FoldFit:
    cleaning: object
    dictionary: Dictionary
    gamma_fit: EivFit
    alpha_fit: EivFit
    delta_fit: Optional[EivFit]
    diagnostics: dict


def _treatment_slot(estimand: Estimand, ds: CorruptedDataset) -> np.ndarray | None:
    """The variable occupying the dictionary's treatment argument."""
    if estimand.needs_instrument:
        return ds.instrument
    if estimand.needs_treatment:
        return ds.D
    return None


def _validate_inputs(ds: CorruptedDataset, estimand: Estimand, L: int, k: int) -> None:
    if L < 2:
        raise ConfigurationError("need at least L=2 folds")
    if ds.n < 2 * L:
        raise ConfigurationError(f"need n >= 2L rows; got n={ds.n}, L={L}")
    if ds.Y is None:
        raise ConfigurationError("dataset has no outcome Y")
    if estimand.needs_treatment and ds.D is None:
        raise ConfigurationError(f"estimand {estimand.tag!r} needs a treatment vector D")
    if estimand.needs_instrument and ds.instrument is None:
        raise ConfigurationError(f"estimand {estimand.tag!r} needs an instrument column")
    if estimand.needs_localizer and ds.V is None:
        raise ConfigurationError(f"estimand {estimand.tag!r} needs a localization covariate V")
    if not 1 <= k <= ds.p:
        raise ConfigurationError(f"need 1 <= k <= p; got k={k}, p={ds.p}")


def _fit_fold(fold_idx: int, ds_train: CorruptedDataset, estimand: Estimand,
              dictionary: Dictionary, k: int, rtol: float) -> _FoldFit:
    m_train = ds_train.n
    if k > min(m_train, ds_train.p):
        raise ConfigurationError(
            f"fold complement has {m_train} rows; cannot truncate at k={k}"
        )
    cleaned, cleaning = fit_cleaning(ds_train.Z, ds_train.mask, k)
    treat = _treatment_slot(estimand, ds_train)
    B = apply_matrix(dictionary, treat, cleaned.values)
    gamma_fit = fit_regression(B, ds_train.Y, cleaning, dictionary, rtol=rtol)
    delta_fit = None
    if estimand.is_ratio:
        delta_fit = fit_regression(B, ds_train.D, cleaning, dictionary, rtol=rtol)
    moment = counterfactual_moment(estimand, treat, cleaned, dictionary,
                                   V_train=ds_train.V)
    alpha_fit = fit_balance(gamma_fit.gram, moment, cleaning, dictionary, rtol=rtol)
    residuals = balance_report(alpha_fit, treat, cleaned, estimand,
                               V_train=ds_train.V)
    diagnostics = {
        "fold": fold_idx,
        "m_train": m_train,
        "regression_rank": gamma_fit.rank_used,
        "regression_min_singular": gamma_fit.min_nonzero_singular,
        "balance_rank": alpha_fit.rank_used,
        "gram_min_eigenvalue": alpha_fit.min_nonzero_singular,
        "balance_residual_max_abs": float(np.max(np.abs(residuals))),
        "moment_projection_residual": alpha_fit.moment_projection_residual,
    }
    if delta_fit is not None:
        diagnostics["denominator_regression_rank"] = delta_fit.rank_used
        diagnostics["denominator_regression_min_singular"] = delta_fit.min_nonzero_singular
    return _FoldFit(cleaning, dictionary, gamma_fit, alpha_fit, delta_fit, diagnostics)


def _score_fold(fit: _FoldFit, estimand: Estimand,
                ds_test: CorruptedDataset) -> tuple[np.ndarray, np.ndarray | None]:
    treat = _treatment_slot(estimand, ds_test)
    fz = fill(ds_test.Z, ds_test.mask, fit.cleaning.rho_hat)
    basis = apply_matrix(fit.dictionary, treat, fz)
    mrows = moment_rows(estimand, fit.dictionary, treat, fz)
    alpha = basis @ fit.alpha_fit.coef
    if isinstance(estimand, LocalizedAte):
        ell = kernel_weights(ds_test.V, estimand.v, estimand.h, estimand.kernel)
    else:
        ell = 1.0
    gamma = basis @ fit.gamma_fit.coef
    psi = ell * (mrows @ fit.gamma_fit.coef) + alpha * (ds_test.Y - gamma)
    psi_den = None
    if estimand.is_ratio:
        delta = basis @ fit.delta_fit.coef
        psi_den = ell * (mrows @ fit.delta_fit.coef) + alpha * (ds_test.D - delta)
    if isinstance(estimand, (PartiallyLinear, Pliv)) and ds_test.weights is not None:
        psi = ds_test.weights * psi
        if psi_den is not None:
            psi_den = ds_test.weights * psi_den
    return psi, psi_den


def _combine_ratio(psi_num: np.ndarray, psi_den: np.ndarray) -> np.ndarray:
    """Delta-method scores for a ratio of two mean functionals.

    The returned vector is centered at the ratio and its population variance
    equals (var_num + theta^2 var_den - 2 theta cov) / theta_den^2.
    """
    theta_num = float(psi_num.mean())
    theta_den = float(psi_den.mean())
    if abs(theta_den) < WEAK_DENOMINATOR_TOL:
        raise WeakInstrumentError(
            f"denominator estimate {theta_den:.3e} is numerically zero"
        )
    theta = theta_num / theta_den
    return theta + ((psi_num - theta_num) - theta * (psi_den - theta_den)) / theta_den


def fold_indices(n: int, L: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle split into L folds of near-equal size.

    Indices within each fold are returned sorted, so the processing order is
    canonical given the fold assignment.
    """
    perm = derive_rng(seed, Stream.FOLDS).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, L)]


def cross_fit_estimate(data: CorruptedDataset, estimand: Estimand, k: int,
                       L: int = 2, seed: int = 0,
                       dictionary: Dictionary | None = None,
                       rtol: float = PINV_RTOL) -> InferenceResult:
    """Cross-fitted doubly robust estimate with confidence interval.

    For each of the L folds (seeded shuffle), cleaning and both
    error-in-variable fits are learned on the complement and scores are
    evaluated on the fold. Scores are pooled in original row order.
    """
    if dictionary is None:
        dictionary = Dictionary(kind=estimand.dictionary_kind, p_in=data.p)
    check_dictionary(estimand, dictionary)
    if dictionary.p_in != data.p:
        raise DimensionError("dictionary p_in must equal the number of covariates")
    _validate_inputs(data, estimand, L, k)

    psi = np.empty(data.n)
    psi_den = np.empty(data.n) if estimand.is_ratio else None
    diagnostics = []
    for fold_idx, test_idx in enumerate(fold_indices(data.n, L, seed)):
        train_mask = np.ones(data.n, dtype=bool)
        train_mask[test_idx] = False
        train_idx = np.flatnonzero(train_mask)
        fit = _fit_fold(fold_idx, data.take(train_idx), estimand, dictionary, k, rtol)
        scores, scores_den = _score_fold(fit, estimand, data.take(test_idx))
        psi[test_idx] = scores
        if psi_den is not None:
            psi_den[test_idx] = scores_den
        diagnostics.append(fit.diagnostics)

    if estimand.is_ratio:
        psi = _combine_ratio(psi, psi_den)
    return _result_from_scores(psi, diagnostics)
