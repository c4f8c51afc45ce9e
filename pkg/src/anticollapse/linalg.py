"""Dense matrix primitives: Gram products, PSD log-determinants and solves.

Matrices are plain float64 numpy arrays. Factorization-based paths
(:func:`logdet_psd`, :func:`solve_psd`) are the production routines;
:func:`sym_eigvals` exists as an independent oracle for tests and is never
called by the other modules.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NotPositiveDefinite, NotSymmetric
from .validation import SYMMETRY_TOL, check_matrix, check_square


def seeded_rng(seed) -> np.random.Generator:
    """Deterministic random generator (numpy PCG64) for a given seed.

    The same seed yields the same stream on every platform; all stochastic
    code in the library draws from generators created here.
    """
    return np.random.default_rng(seed)


def gram_features(x) -> np.ndarray:
    """Feature-side Gram matrix ``X.T @ X`` (d x d), explicitly symmetrized."""
    x = check_matrix(x, "X", allow_empty=True)
    g = x.T @ x
    return (g + g.T) / 2.0


def gram_samples(x) -> np.ndarray:
    """Sample-side Gram matrix ``X @ X.T`` (n x n), explicitly symmetrized."""
    x = check_matrix(x, "X", allow_empty=True)
    g = x @ x.T
    return (g + g.T) / 2.0


def _check_symmetric(a: np.ndarray, name: str) -> np.ndarray:
    worst = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if worst > SYMMETRY_TOL:
        raise NotSymmetric(f"{name} asymmetry {worst:.3e} exceeds {SYMMETRY_TOL:.0e}")
    return (a + a.T) / 2.0


def _cholesky(a: np.ndarray, name: str) -> np.ndarray:
    try:
        return scipy.linalg.cholesky(a, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} is not positive definite: {exc}") from exc


def logdet_psd(a) -> float:
    """Natural log-determinant of a symmetric positive definite matrix.

    Computed from a Cholesky factor as twice the sum of log diagonal terms.
    """
    a = _check_symmetric(check_square(a, "A"), "A")
    lower = _cholesky(a, "A")
    return float(2.0 * np.sum(np.log(np.diag(lower))))


def solve_psd(a, b) -> np.ndarray:
    """Solve ``A @ X = B`` for symmetric positive definite ``A``."""
    a = _check_symmetric(check_square(a, "A"), "A")
    b_arr = np.asarray(b, dtype=np.float64)
    lower = _cholesky(a, "A")
    return scipy.linalg.cho_solve((lower, True), b_arr)


def sym_eigvals(a) -> np.ndarray:
    """All real eigenvalues of a symmetric matrix, ascending. Test oracle only."""
    a = _check_symmetric(check_square(a, "A"), "A")
    return np.linalg.eigvalsh(a)
