"""Kernel estimates and error metrics from feature matrices.

The Gram estimate is only ever materialized at validation scale; real
workloads go through kernel_matvec, which applies the low-rank estimate to
a vector without forming any N x N product.
"""

from __future__ import annotations

import numpy as np

from .walker import DENSE_LIMIT, FeatureMatrix, SeedCollisionError


def _check_pair(phi1: FeatureMatrix, phi2: FeatureMatrix) -> None:
    if phi1.n != phi2.n:
        raise ValueError(f"feature matrices disagree on N: {phi1.n} vs {phi2.n}")
    if phi1.seed == phi2.seed:
        raise SeedCollisionError(
            "feature matrices share a seed; diagonal estimates would be biased "
            "(use feature_pair or pass distinct seeds)"
        )


def estimate_gram(phi1: FeatureMatrix, phi2: FeatureMatrix, symmetrize: bool = False) -> np.ndarray:
    """Gram estimate K[i, j] = phi1 row i . phi2 row j.

    The raw product is what the unbiasedness theory covers; symmetrize
    averages it with its transpose only when explicitly requested.
    """
    _check_pair(phi1, phi2)
    if phi1.n > DENSE_LIMIT:
        raise ValueError(
            f"refusing to materialize a {phi1.n}^2 Gram matrix; use kernel_matvec"
        )
    k = phi1.toarray() @ phi2.toarray().T
    if symmetrize:
        k = 0.5 * (k + k.T)
    return k


def kernel_matvec(phi1: FeatureMatrix, phi2: FeatureMatrix, v: np.ndarray) -> np.ndarray:
    """Apply the Gram estimate to a vector as phi1 (phi2^T v), inner first."""
    _check_pair(phi1, phi2)
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != phi2.n:
        raise ValueError(f"vector length {v.shape[0]} != N = {phi2.n}")
    inner = phi2.rows.T @ v
    return phi1.rows @ inner


def relative_frobenius_error(k: np.ndarray, k_hat: np.ndarray) -> float:
    """|K - K_hat|_F / |K|_F."""
    k = np.asarray(k, dtype=np.float64)
    k_hat = np.asarray(k_hat, dtype=np.float64)
    if k.shape != k_hat.shape:
        raise ValueError(f"shape mismatch: {k.shape} vs {k_hat.shape}")
    ref = float(np.linalg.norm(k))
    if ref == 0.0:
        raise ValueError("reference matrix has zero Frobenius norm")
    return float(np.linalg.norm(k - k_hat)) / ref
