"""Error-in-variable regression and balancing on a cleaned training fold.

Both fits share one linear-algebra core: a minimal-norm least squares
solution through a truncated-SVD pseudoinverse. The regression solves the
dictionary matrix against the outcome; the balancing fit solves the Gram
matrix against the counterfactual moment. Predictions on test rows never
touch the training principal subspace: the raw row is zero-filled and the
inverse observation rates are absorbed into the coefficient vector, so each
prediction is a single dot product and test rows stay independent given the
training fold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cleaning import CleanedMatrix, CleaningModel
from .dictionary import Dictionary, apply_matrix, covariate_slot_scale
from .errors import DegenerateFitError, DimensionError
from .estimands import Estimand, LocalizedAte, check_dictionary, kernel_weights, moment_rows

# Relative cutoff below which singular values are treated as zero in
# pseudoinverse solves. Exposed as a parameter on every fit.
PINV_RTOL = 1e-10


@dataclass(frozen=True)
class CounterfactualMoment:
    """Train-fold mean of the per-row moment vectors for one estimand."""

    m_hat: np.ndarray
    estimand: Estimand


@dataclass(frozen=True)
class EivFit:
    """Fitted coefficients plus everything prediction needs.

    ``coef`` is beta for a regression fit and eta for a balance fit.
    ``coef_tilde`` is the same vector with 1/rho_hat absorbed into the
    covariate-linear dictionary slots; dotting it with the basis row of a
    zero-filled raw test row reproduces the filled prediction exactly.
    ``min_nonzero_singular`` is the conditioning diagnostic: the smallest
    retained singular value of the dictionary matrix (regression) or the
    smallest retained eigenvalue of the Gram matrix (balance).
    ``moment_projection_residual`` (balance fits only) is the Euclidean norm
    of the moment component outside the Gram row space; a large value warns
    that exact balance is unattainable for this counterfactual.
    """

    coef: np.ndarray
    role: str
    gram: np.ndarray
    rank_used: int
    min_nonzero_singular: float
    cleaning: CleaningModel
    dictionary: Dictionary
    coef_tilde: np.ndarray
    moment_projection_residual: Optional[float] = None


def _absorb_rates(coef: np.ndarray, dictionary: Dictionary,
                  cleaning: CleaningModel) -> np.ndarray:
    return coef * covariate_slot_scale(dictionary, 1.0 / cleaning.rho_hat)


def fit_regression(B: np.ndarray, Y: np.ndarray, cleaning: CleaningModel,
                   dictionary: Dictionary, rtol: float = PINV_RTOL) -> EivFit:
    """Minimal-norm OLS of Y on the cleaned dictionary matrix B.

    beta = B^+ Y with singular values below rtol * s_max dropped; equals
    (B^T B)^+ B^T Y. Records the smallest retained singular value so callers
    can monitor conditioning.
    """
    B = np.asarray(B, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if B.ndim != 2 or Y.shape != (B.shape[0],):
        raise DimensionError("B must be (m, p_out) and Y must be (m,)")
    if not np.any(B):
        raise DegenerateFitError("dictionary matrix is identically zero")
    m = B.shape[0]
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    keep = s > rtol * s[0]
    if not np.any(keep):
        raise DegenerateFitError("dictionary matrix has numerical rank zero")
    beta = Vt[keep].T @ ((U[:, keep].T @ Y) / s[keep])
    gram = B.T @ B / m
    return EivFit(
        coef=beta,
        role="regression",
        gram=gram,
        rank_used=int(keep.sum()),
        min_nonzero_singular=float(s[keep].min()),
        cleaning=cleaning,
        dictionary=dictionary,
        coef_tilde=_absorb_rates(beta, dictionary, cleaning),
    )


def counterfactual_moment(estimand: Estimand, D_train: np.ndarray | None,
                          Xhat: CleanedMatrix, dictionary: Dictionary,
                          V_train: np.ndarray | None = None) -> CounterfactualMoment:
    """Mean over training rows of the estimand's moment vectors.

    For the kernel-localized estimand the rows are weighted by the in-fold
    kernel weights of the localization covariate before averaging.
    """
    check_dictionary(estimand, dictionary)
    rows = moment_rows(estimand, dictionary, D_train, Xhat.values)
    if isinstance(estimand, LocalizedAte):
        if V_train is None:
            raise DimensionError("localized estimand needs the localization covariate V")
        ell = kernel_weights(V_train, estimand.v, estimand.h, estimand.kernel)
        rows = rows * ell[:, None]
    return CounterfactualMoment(m_hat=rows.mean(axis=0), estimand=estimand)


def fit_balance(gram: np.ndarray, moment: CounterfactualMoment,
                cleaning: CleaningModel, dictionary: Dictionary,
                rtol: float = PINV_RTOL) -> EivFit:
    """Minimal-norm balancing coefficients eta = G^+ m_hat.

    ``gram`` must be (1/m) B^T B for the same cleaned dictionary matrix that
    produced the moment; the 1/m normalizations of Gram and moment cancel.
    A zero Gram with a zero moment yields eta = 0; a zero Gram with a
    nonzero moment is degenerate.
    """
    G = np.asarray(gram, dtype=float)
    m_hat = np.asarray(moment.m_hat, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or m_hat.shape != (G.shape[0],):
        raise DimensionError("gram must be square and match the moment length")
    w, Q = np.linalg.eigh(G)
    w_max = float(w[-1]) if w.size else 0.0
    keep = w > rtol * w_max if w_max > 0 else np.zeros_like(w, dtype=bool)
    if not np.any(keep):
        if np.any(m_hat):
            raise DegenerateFitError("Gram matrix has rank zero but the moment is nonzero")
        eta = np.zeros_like(m_hat)
        projection_residual = 0.0
        min_kept = 0.0
    else:
        Qk = Q[:, keep]
        coords = Qk.T @ m_hat
        eta = Qk @ (coords / w[keep])
        projection_residual = float(np.linalg.norm(m_hat - Qk @ coords))
        min_kept = float(w[keep].min())
    return EivFit(
        coef=eta,
        role="balance",
        gram=G,
        rank_used=int(keep.sum()),
        min_nonzero_singular=min_kept,
        cleaning=cleaning,
        dictionary=dictionary,
        coef_tilde=_absorb_rates(eta, dictionary, cleaning),
        moment_projection_residual=projection_residual,
    )


def predict(fit: EivFit, d: float | None, z: np.ndarray,
            mask_row: np.ndarray | None = None) -> float:
    """Prediction on one raw corrupted row, implicitly cleaned.

    Missing entries contribute zero and observed entries are rescaled by the
    training rates through the absorbed coefficients; the row is never
    projected onto principal components.
    """
    z = np.asarray(z, dtype=float)
    if mask_row is None:
        mask_row = np.isfinite(z)
    z0 = np.where(mask_row, z, 0.0)
    if z0.shape != (fit.dictionary.p_in,):
        raise DimensionError(f"row has shape {z0.shape}, expected ({fit.dictionary.p_in},)")
    D = None if d is None else np.asarray([d], dtype=float)
    row = apply_matrix(fit.dictionary, D, z0[None, :])[0]
    return float(row @ fit.coef_tilde)


def predict_matrix(fit: EivFit, D: np.ndarray | None, Z: np.ndarray,
                   mask: np.ndarray) -> np.ndarray:
    """Vectorized ``predict`` over many rows; rows remain independent."""
    Z0 = np.where(np.asarray(mask, dtype=bool), np.asarray(Z, dtype=float), 0.0)
    return apply_matrix(fit.dictionary, D, Z0) @ fit.coef_tilde


def balance_report(fit: EivFit, D_train: np.ndarray | None, Xhat: CleanedMatrix,
                   estimand: Estimand, V_train: np.ndarray | None = None) -> np.ndarray:
    """Per-column balance residuals (1/m) sum_i b_i * omega_i - m_hat.

    Zero (to numerical precision) whenever the moment lies in the row space
    of the cleaned dictionary matrix: the balancing weights then equate the
    reweighted regressors with their counterfactual moment exactly, at any
    sample size.
    """
    if fit.role != "balance":
        raise DimensionError("balance_report needs a balance fit")
    B = apply_matrix(fit.dictionary, D_train, Xhat.values)
    omega = B @ fit.coef
    lhs = B.T @ omega / B.shape[0]
    moment = counterfactual_moment(estimand, D_train, Xhat, fit.dictionary, V_train)
    return lhs - moment.m_hat
