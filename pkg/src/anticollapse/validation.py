"""Input validation helpers shared across the library.

All numeric code operates on 2-D float64 numpy arrays; these helpers coerce
and check inputs once at the public boundaries so the numeric kernels can
assume clean data.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyInput, LengthMismatch, NonFiniteValue, NotNormalized

#: Absolute tolerance for symmetry checks on square matrices.
SYMMETRY_TOL = 1e-12


def check_matrix(a, name: str = "matrix", *, allow_empty: bool = False) -> np.ndarray:
    """Coerce ``a`` to a finite, 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not allow_empty and arr.shape[0] == 0:
        raise EmptyInput(f"{name} has no rows")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} contains NaN or infinity")
    return arr


def check_square(a, name: str = "matrix") -> np.ndarray:
    arr = check_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_labels(labels, n_rows: int, name: str = "labels") -> np.ndarray:
    """Coerce labels to a 1-D int64 array of length ``n_rows``, entries >= 0."""
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.shape[0] != n_rows:
        raise LengthMismatch(f"{name} has length {arr.shape[0]}, expected {n_rows}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.floor(arr)):
            raise ValueError(f"{name} must be integral class ids")
    arr = arr.astype(np.int64)
    if arr.size and arr.min() < 0:
        raise ValueError(f"{name} must be nonnegative class ids")
    return arr


def check_unit_rows(a: np.ndarray, tol: float, name: str = "matrix") -> np.ndarray:
    """Raise :class:`NotNormalized` if any row norm deviates from 1 beyond ``tol``."""
    norms = np.linalg.norm(a, axis=1)
    worst = float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0
    if worst > tol:
        raise NotNormalized(f"{name} rows deviate from unit norm by {worst:.3e} (> {tol:.0e})")
    return a


def normalize_rows(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Project rows onto the unit sphere; zero rows are rejected."""
    norms = np.linalg.norm(a, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError(f"{name} contains a zero row; cannot project to the unit sphere")
    return a / norms
