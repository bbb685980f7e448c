"""Small input-validation helpers shared by the library, CLI and estimator."""

from __future__ import annotations

import numpy as np

__all__ = ["as_coefficient_vector", "as_direction_vector", "symmetric_measurement"]


def as_coefficient_vector(x, n: int | None = None, name: str = "coefficients") -> np.ndarray:
    """Validate a strictly positive coefficient vector, returning a float copy."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if np.any(arr <= 0.0):
        raise ValueError(f"{name} must be strictly positive")
    return arr.copy()


def as_direction_vector(d, n: int, name: str = "direction") -> np.ndarray:
    """Validate a finite direction vector of length n (any sign allowed)."""
    arr = np.asarray(d, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr.copy()


def symmetric_measurement(y, rtol: float = 1e-8) -> np.ndarray:
    """Validate a square measurement matrix and return its symmetric part.

    Mild asymmetry (below ``rtol`` relative to the largest entry) is
    symmetrized away; anything larger indicates corrupted data and raises.
    """
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"measurement matrix must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("measurement matrix must be finite")
    scale = max(1.0, float(np.abs(arr).max()))
    skew = float(np.abs(arr - arr.T).max())
    if skew > rtol * scale:
        raise ValueError(
            f"measurement matrix is not symmetric (max asymmetry {skew:.3e})"
        )
    return 0.5 * (arr + arr.T)
