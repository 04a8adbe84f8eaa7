"""Small dense linear-algebra helpers shared by the filters.

Everything here targets desk-scale matrices (state dimension <= 20), so
plain dense factorizations are used throughout.
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ModelConsistencyError, SingularityError


def sym(a: np.ndarray) -> np.ndarray:
    """Symmetrized copy (a + a') / 2."""
    return (a + a.T) / 2.0


def solve_spd(a: np.ndarray, b: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Solve a @ x = b for symmetric positive definite a via Cholesky."""
    try:
        return cho_solve(cho_factor(a, lower=True), b)
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"{what} is singular or not positive definite") from exc


def inv_spd(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Explicit inverse of a symmetric positive definite matrix."""
    return sym(solve_spd(a, np.eye(a.shape[0]), what=what))


def psd_sqrt(a: np.ndarray, what: str = "covariance") -> np.ndarray:
    """Factor L with L @ L' = a for symmetric PSD a.

    Tiny negative eigenvalues are floored at zero; anything below the
    -1e-10 tolerance is treated as a broken covariance.
    """
    w, v = np.linalg.eigh(sym(a))
    if w.min() < -1e-10 * max(1.0, abs(w.max())):
        raise ModelConsistencyError(
            f"{what} has a negative eigenvalue ({w.min():.3e})"
        )
    return v * np.sqrt(np.clip(w, 0.0, None))


def rank_with_tol(a: np.ndarray, rel_tol: float = 1e-12) -> int:
    """Numerical rank with threshold max(shape) * sigma_max * rel_tol."""
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > max(a.shape) * s[0] * rel_tol))
