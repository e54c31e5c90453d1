"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_consistent_length


def check_counts(*counts, allow_negative: bool = False) -> list[np.ndarray]:
    """Coerce count columns to float arrays of equal length."""
    arrays = [np.atleast_1d(np.asarray(c, dtype=float)) for c in counts]
    check_consistent_length(*arrays)
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("counts must be finite")
        if not allow_negative and np.any(a < 0):
            raise ValueError("counts must be non-negative")
    return arrays


def check_fringe(phases, counts, sigmas=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.asarray(phases, dtype=float).ravel()
    y = np.asarray(counts, dtype=float).ravel()
    s = np.ones_like(y) if sigmas is None else np.asarray(sigmas, dtype=float).ravel()
    check_consistent_length(x, y, s)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.all(np.isfinite(s))):
        raise ValueError("fringe data must be finite")
    if np.any(s <= 0):
        raise ValueError("fringe uncertainties must be positive")
    if x.size < 5:
        raise ValueError(f"need at least 5 fringe samples, got {x.size}")
    return x, y, s


def check_density(rho, atol: float = 1e-12) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"polarization density must be 2x2, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise ValueError("density matrix does not have unit trace")
    if np.min(np.linalg.eigvalsh(rho)) < -atol:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho
