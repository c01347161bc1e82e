"""Dense symmetric eigensolvers for the projection subproblem.

The generalized solver handles a definite pencil (A positive definite,
B positive semidefinite) by whitening: A = LL^T, M = L^{-1} B L^{-T}.
Large eigenvalues of M correspond to small generalized eigenvalues of
(A, B); directions in the null space of B (infinite generalized eigenvalue)
are excluded by an eigenvalue cutoff, shrinking the returned basis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import NumericsError

NULLSPACE_CUTOFF = 1e-10
SYMMETRY_TOL = 1e-8


@dataclass
class EigResult:
    """Generalized eigenvectors (B-orthonormal columns) and ascending eigenvalues."""

    vectors: np.ndarray
    values: np.ndarray
    effective_d: int


def _check_symmetric(M: np.ndarray, what: str) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    scale = max(1.0, float(np.abs(M).max()) if M.size else 1.0)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NumericsError(f"{what} must be square")
    if np.abs(M - M.T).max() > SYMMETRY_TOL * scale:
        raise NumericsError(f"{what} is not symmetric within {SYMMETRY_TOL}")
    return (M + M.T) / 2.0


def _fix_signs(V: np.ndarray) -> np.ndarray:
    if V.size == 0:
        return V
    flip = np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])])
    flip[flip == 0] = 1.0
    return V * flip


def sym_eig(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix: ascending values, orthonormal vectors."""
    M = _check_symmetric(M, "matrix")
    values, vectors = linalg.eigh(M)
    return values, _fix_signs(vectors)


def gen_eig_smallest(A: np.ndarray, B: np.ndarray, d: int) -> EigResult:
    """Solve A p = pi B p for the d smallest eigenvalues of a definite pencil.

    A must be positive definite (the caller supplies any ridge term), B
    positive semidefinite. Returned columns satisfy p^T B p = 1 and are
    mutually B-orthogonal; `effective_d` can be smaller than `d` when B is
    rank deficient, in which case the missing columns are dropped with a
    warning.
    """
    if d < 1:
        raise NumericsError(f"d must be >= 1, got {d}")
    A = _check_symmetric(A, "left-hand matrix")
    B = _check_symmetric(B, "right-hand matrix")
    try:
        L = linalg.cholesky(A, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericsError("left-hand matrix is not positive definite") from exc
    Y = linalg.solve_triangular(L, B, lower=True)
    M = linalg.solve_triangular(L, Y.T, lower=True).T
    M = (M + M.T) / 2.0
    nu, V = linalg.eigh(M)
    take = min(d, len(nu))
    nu_desc = nu[::-1][:take]
    V_desc = V[:, ::-1][:, :take]
    effective_d = int((nu_desc > NULLSPACE_CUTOFF).sum())
    if effective_d < d:
        warnings.warn(
            f"right-hand matrix supports only {effective_d} of {d} requested "
            "directions; extra columns dropped",
            RuntimeWarning,
            stacklevel=2,
        )
    nu_keep = nu_desc[:effective_d]
    W = V_desc[:, :effective_d]
    P = linalg.solve_triangular(L.T, W, lower=False)
    P = P / np.sqrt(nu_keep)[None, :]
    return EigResult(vectors=_fix_signs(P), values=1.0 / nu_keep, effective_d=effective_d)
