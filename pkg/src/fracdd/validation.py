"""Input validation helpers (complex-aware counterparts of sklearn's)."""

import numpy as np


def check_pairs(X) -> np.ndarray:
    """Validate an array of DD pairs, returning float ``(S, 2)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1 and X.shape == (2,):
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError(f"expected DD pairs of shape (n_samples, 2), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("DD pairs contain non-finite values")
    return X


def check_observations(Y, MN: int) -> np.ndarray:
    """Validate observations, returning complex ``(n, MN)``."""
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[None, :]
    if Y.ndim != 2 or Y.shape[1] != MN:
        raise ValueError(f"expected observations of shape (n, {MN}), got {Y.shape}")
    Y = Y.astype(complex, copy=False)
    if not np.all(np.isfinite(Y)):
        raise ValueError("observations contain non-finite values")
    return Y


def check_sigma2(sigma2, n: int) -> np.ndarray:
    s = np.broadcast_to(np.asarray(sigma2, dtype=float), (n,))
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("noise variances must be finite and non-negative")
    return s
