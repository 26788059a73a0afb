"""Non-negative matrix factorization with Frobenius multiplicative updates."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

logger = logging.getLogger(__name__)

EPSILON = 1e-12
DEFAULT_MAX_ITER = 500
DEFAULT_TOL = 1e-5


@dataclass
class NmfModel:
    W: np.ndarray
    H: np.ndarray
    frobenius_error: float
    iterations: int
    seed: int
    error_history: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def k(self) -> int:
        return self.H.shape[0]

    def relative_error(self, X: np.ndarray) -> float:
        norm = float(np.linalg.norm(X))
        if norm == 0.0:
            return 0.0
        return self.frobenius_error / norm


def _frobenius(X: np.ndarray, W: np.ndarray, H: np.ndarray) -> float:
    return float(np.linalg.norm(X - W @ H))


def nmf_factorize(
    X: np.ndarray,
    k: int = 3,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> NmfModel:
    """Factorize ``X ≈ W @ H`` with ``W, H >= 0``.

    W and H start from seeded uniform values scaled to the mean of X. Each
    iteration applies the Lee-Seung updates (H first, then W) and records
    ``‖X - WH‖_F``; ``error_history[0]`` is the error of the initialization.
    The loop stops when the relative improvement drops below ``tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("NMF input must be a 2-d matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("NMF input contains non-finite values")
    if np.any(X < 0):
        row, col = np.argwhere(X < 0)[0]
        raise ValueError(f"NMF input has a negative entry at row {row}, column {col}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if tol < 0:
        raise ValueError("tol must be >= 0")

    n_rows, n_cols = X.shape
    rng = np.random.default_rng(seed)
    scale = np.sqrt(max(X.mean(), EPSILON) / k)
    W = rng.uniform(size=(n_rows, k)) * scale
    H = rng.uniform(size=(k, n_cols)) * scale

    error = _frobenius(X, W, H)
    history = [error]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        H *= (W.T @ X) / (W.T @ W @ H + EPSILON)
        W *= (X @ H.T) / (W @ (H @ H.T) + EPSILON)

        new_error = _frobenius(X, W, H)
        history.append(new_error)
        previous, error = error, new_error
        if previous == 0.0 or (previous - error) / previous < tol:
            converged = True
            break

    logger.info(
        "NMF k=%d on %dx%d finished after %d iterations (error %.6g, converged=%s)",
        k, n_rows, n_cols, iterations, error, converged,
    )
    return NmfModel(
        W=W,
        H=H,
        frobenius_error=error,
        iterations=iterations,
        seed=seed,
        error_history=history,
        converged=converged,
    )
