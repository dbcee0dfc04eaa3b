"""Dense complex linear solves for scatterer interaction systems.

System sizes stay tiny (n <= ~64 scatterers), so a pivoted dense LU is the
whole story.  One step of iterative refinement keeps residuals near machine
precision even for badly conditioned near-resonant configurations.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve as _lapack_lu_solve

from .errors import SingularMatrixError

# A pivot this small relative to the largest matrix entry flags a resonant or
# degenerate configuration instead of returning garbage.
SINGULAR_PIVOT_RTOL = 1e-14


def _checked(a, b):
    a = np.ascontiguousarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    if b.shape[0] != a.shape[0]:
        raise ValueError("right-hand side length does not match matrix")
    if not (np.all(np.isfinite(a.real)) and np.all(np.isfinite(a.imag))):
        raise ValueError("matrix entries must be finite")
    if not (np.all(np.isfinite(b.real)) and np.all(np.isfinite(b.imag))):
        raise ValueError("right-hand side entries must be finite")
    return a, b


def lu_solve(a, b):
    """Solve a @ x = b with partial pivoting; b may hold multiple columns.

    Raises SingularMatrixError when any pivot magnitude falls below
    SINGULAR_PIVOT_RTOL * max|a|.
    """
    a, b = _checked(a, b)
    if a.shape[0] == 0:
        return np.zeros_like(b)
    scale = np.abs(a).max()
    with np.errstate(invalid="ignore"), warnings.catch_warnings():
        # exact singularity surfaces through the pivot check below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or not np.all(np.isfinite(pivots)) or pivots.min() < SINGULAR_PIVOT_RTOL * scale:
        raise SingularMatrixError(
            f"pivot {pivots.min() if scale else 0.0:.3e} below {SINGULAR_PIVOT_RTOL:.0e} * max|A| = {SINGULAR_PIVOT_RTOL * scale:.3e}"
        )
    x = _lapack_lu_solve((lu, piv), b, check_finite=False)
    # single refinement pass: residual ~ eps*||b|| even near the pivot threshold
    x = x + _lapack_lu_solve((lu, piv), b - a @ x, check_finite=False)
    return x


def adjoint_solve(a, b):
    """Solve the adjoint system a^H @ h = b.

    Via conjugation this is h = conj(solve(a^T, conj(b))); for the symmetric
    interaction matrices produced here a^T = a, so the same factorization
    path applies.
    """
    a, b = _checked(a, b)
    return np.conj(lu_solve(np.ascontiguousarray(a.T), np.conj(b)))
