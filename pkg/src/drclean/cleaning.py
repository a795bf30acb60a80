"""Data cleaning: observation rates, zero-fill with rescaling, PCA truncation.

Cleaning is learned on a training fold and the learned scalings travel with
the model: test rows are only ever *filled* with the training rates, never
projected onto the training principal subspace. There is deliberately no
test-cleaning entry point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericalError

# Numerical rank tolerance used consistently for invariant checks:
# singular values below RANK_RTOL * s_max count as zero.
RANK_RTOL = 1e-8


@dataclass(frozen=True)
class CleaningModel:
    """Fill scalings and truncated SVD learned on a training fold.

    ``rho_hat`` are per-column observation rates floored at ``1/m_train``;
    ``singular_values`` is the full nonincreasing spectrum of the filled
    training matrix, while ``left_vectors``/``right_vectors`` keep only the
    top ``k`` singular triplets.
    """

    rho_hat: np.ndarray
    k: int
    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    m_train: int


@dataclass(frozen=True)
class CleanedMatrix:
    """Rank-k reconstruction of a filled training matrix (ambient p kept)."""

    values: np.ndarray


def estimate_rates(Z: np.ndarray, mask: np.ndarray, m: int | None = None) -> np.ndarray:
    """Per-column observation rates: max(observed fraction, 1/m)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.shape[0] == 0:
        raise DimensionError("need a nonempty 2-d matrix")
    if m is None:
        m = mask.shape[0]
    if m < 1 or mask.shape[0] != m:
        raise DimensionError(f"matrix has {mask.shape[0]} rows, expected m={m}")
    return np.maximum(mask.mean(axis=0), 1.0 / m)


def fill(Z: np.ndarray, mask: np.ndarray, rho_hat: np.ndarray) -> np.ndarray:
    """Observed entries become Z_ij / rho_hat_j; missing entries become 0.

    ``rho_hat`` may come from a different fold than ``Z`` (training rates
    applied to test rows). Masked entries are never read.
    """
    Z = np.asarray(Z, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    rho_hat = np.asarray(rho_hat, dtype=float)
    if Z.shape != mask.shape:
        raise DimensionError("Z and mask shapes differ")
    if rho_hat.shape != (Z.shape[1],):
        raise DimensionError("rho_hat length must match the number of columns")
    return np.where(mask, Z, 0.0) / rho_hat


def fill_row(z: np.ndarray, mask_row: np.ndarray, rho_hat: np.ndarray) -> np.ndarray:
    """Single-row fill used for prediction paths."""
    return fill(z[None, :], mask_row[None, :], rho_hat)[0]


def pca_truncate(M: np.ndarray, k: int,
                 rho_hat: np.ndarray | None = None) -> tuple[CleanedMatrix, CleaningModel]:
    """Truncate M to its top-k principal components.

    Returns the rank-k reconstruction U_k S_k V_k^T and a model holding the
    retained triplets plus the full spectrum. Ties between singular values
    are broken by decomposition order. ``rho_hat`` is stored in the model
    when supplied (ones otherwise) so prediction code can import the fill
    scalings.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionError("M must be 2-d")
    m, p = M.shape
    if not 1 <= k <= min(m, p):
        raise DimensionError(f"need 1 <= k <= min(m, p); got k={k}")
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        scale = float(np.max(np.abs(M))) if M.size else 0.0
        raise NumericalError(
            f"SVD failed to converge on a {m}x{p} matrix (max |entry| = {scale:g})"
        ) from exc
    Uk, sk, Vk = U[:, :k], s[:k], Vt[:k].T
    cleaned = CleanedMatrix(values=(Uk * sk) @ Vk.T)
    if rho_hat is None:
        rho_hat = np.ones(p)
    model = CleaningModel(
        rho_hat=np.asarray(rho_hat, dtype=float),
        k=k,
        singular_values=s,
        left_vectors=Uk,
        right_vectors=Vk,
        m_train=m,
    )
    return cleaned, model


def fit_cleaning(Z_train: np.ndarray, mask_train: np.ndarray,
                 k: int) -> tuple[CleanedMatrix, CleaningModel]:
    """Estimate rates, fill, and truncate a training fold in one call."""
    rho_hat = estimate_rates(Z_train, mask_train)
    filled = fill(Z_train, mask_train, rho_hat)
    return pca_truncate(filled, k, rho_hat=rho_hat)


def scree(Z: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Full singular value spectrum, nonincreasing.

    A masked matrix is filled first with its own observation rates, matching
    what the cleaning step would decompose.
    """
    Z = np.asarray(Z, dtype=float)
    if mask is not None:
        rho_hat = estimate_rates(Z, mask)
        Z = fill(Z, mask, rho_hat)
    return np.linalg.svd(Z, compute_uv=False)


def numerical_rank(singular_values: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Count of singular values above rtol * s_max."""
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def suggest_k(singular_values: np.ndarray, fraction: float = 0.2) -> int:
    """Heuristic elbow rule: largest index whose singular value exceeds
    ``fraction`` of the top value.

    Advisory only; the cleaning rank is always chosen explicitly by the
    caller, never silently.
    """
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0 or s[0] <= 0.0:
        return 1
    return max(1, int(np.sum(s > fraction * s[0])))
