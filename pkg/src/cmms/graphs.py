"""Graph construction: the source class-structure Laplacian and the learned
adaptive-neighbor similarity of the target domain with its Laplacian.

The similarity update solves, per row, the regularized neighbor-assignment
problem ``min ||s + a/(2*delta)||^2`` over the probability simplex restricted
to the k nearest neighbors. With all k neighbors active the solution is the
thresholded closed form ``s_j = max(z - a_j/(2*delta), 0)``; the active-set
refinement below handles rows where the global scale delta clips some of them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

DELTA_EPS = 1e-12


@dataclass
class SourceLaplacian:
    """Symmetric PSD Laplacian encoding within-class compactness of the source."""

    matrix: np.ndarray
    class_sizes: np.ndarray


@dataclass
class TargetGraph:
    """Row-stochastic neighbor similarity with its symmetrized Laplacian."""

    S: np.ndarray
    delta: float
    k: int
    L_t: np.ndarray

    @classmethod
    def from_distances(cls, dists: np.ndarray, k: int, delta: float) -> "TargetGraph":
        S = update_similarity(dists, k, delta)
        return cls(S=S, delta=delta, k=k, L_t=laplacian_from_similarity(S))


def source_laplacian(labels: np.ndarray) -> SourceLaplacian:
    """Laplacian with 1 - 1/n_c on the diagonal and -1/n_c between same-class pairs.

    `labels` must be dense 1..C with every class nonempty.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or len(labels) == 0:
        raise DataError("labels must be a nonempty vector")
    C = int(labels.max())
    counts = np.bincount(labels, minlength=C + 1)[1:]
    if labels.min() < 1 or (counts == 0).any():
        raise DataError("labels must cover every class in 1..C")
    n = len(labels)
    W = np.zeros((n, n))
    for c in range(1, C + 1):
        idx = np.flatnonzero(labels == c)
        W[np.ix_(idx, idx)] = 1.0 / len(idx)
    L = np.diag(W.sum(axis=1)) - W
    return SourceLaplacian(matrix=L, class_sizes=counts.astype(np.int64))


def scatter_laplacian_from_onehot(G: np.ndarray) -> np.ndarray:
    """Source-style intra-class scatter Laplacian from a one-hot assignment.

    Empty clusters contribute nothing (used with pseudo-labels, where a
    cluster can lose all members).
    """
    G = np.asarray(G, dtype=np.float64)
    n = G.shape[0]
    counts = G.sum(axis=0)
    W = np.zeros((n, n))
    for c in range(G.shape[1]):
        if counts[c] == 0:
            continue
        idx = np.flatnonzero(G[:, c] > 0)
        W[np.ix_(idx, idx)] = 1.0 / len(idx)
    return np.diag(W.sum(axis=1)) - W


def pairwise_sq_dists(Z: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows, exact zeros on the diagonal."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] < 2:
        raise DataError("need a 2-d array with at least 2 rows")
    sq = np.einsum("ij,ij->i", Z, Z)
    A = sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T)
    np.maximum(A, 0.0, out=A)
    A = (A + A.T) / 2.0
    np.fill_diagonal(A, 0.0)
    return A


def estimate_delta(B: np.ndarray, k: int) -> float:
    """Neighborhood scale from original-space distances.

    Averages, over rows of B sorted ascending with the diagonal excluded,
    (k/2) * b[k+1] - (1/2) * sum(b[1..k]). Nonnegative by construction.
    """
    B = np.asarray(B, dtype=np.float64)
    n = B.shape[0]
    if k < 1 or k > n - 2:
        raise DataError(f"k={k} out of range [1, {n - 2}] for {n} points")
    work = B.copy()
    np.fill_diagonal(work, np.inf)
    sorted_rows = np.sort(work, axis=1)[:, : k + 1]
    terms = 0.5 * k * sorted_rows[:, k] - 0.5 * sorted_rows[:, :k].sum(axis=1)
    return float(max(terms.mean(), 0.0))


def _project_rows_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row (sorted descending) onto the simplex."""
    k = v.shape[1]
    cums = np.cumsum(v, axis=1)
    steps = np.arange(1, k + 1)
    active = v > (cums - 1.0) / steps
    rho = active.sum(axis=1)
    theta = (cums[np.arange(len(v)), rho - 1] - 1.0) / rho
    return np.maximum(v - theta[:, None], 0.0)


def update_similarity(A: np.ndarray, k: int, delta: float) -> np.ndarray:
    """Optimal row-stochastic similarity supported on each row's k nearest neighbors.

    The diagonal is excluded from neighbor selection; ties break toward the
    lower index. For delta ~ 0 (tied distances) each row gets uniform 1/k
    weight on its k nearest neighbors.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DataError("distance matrix must be square")
    if not np.isfinite(A).all():
        raise DataError("distance matrix has non-finite entries")
    if k < 1 or k > n - 1:
        raise DataError(f"k={k} out of range [1, {n - 1}] for {n} points")
    work = A.copy()
    np.fill_diagonal(work, np.inf)
    order = np.argsort(work, axis=1, kind="stable")[:, :k]
    rows = np.arange(n)[:, None]
    S = np.zeros((n, n))
    if delta <= DELTA_EPS:
        S[rows, order] = 1.0 / k
        return S
    neigh = np.take_along_axis(work, order, axis=1)
    S[rows, order] = _project_rows_to_simplex(-neigh / (2.0 * delta))
    return S


def laplacian_from_similarity(S: np.ndarray) -> np.ndarray:
    """Symmetrized graph Laplacian D - (S + S^T)/2 with zero row sums."""
    Sbar = (np.asarray(S, dtype=np.float64) + np.asarray(S, dtype=np.float64).T) / 2.0
    Sbar = Sbar.copy()
    np.fill_diagonal(Sbar, 0.0)
    return np.diag(Sbar.sum(axis=1)) - Sbar


def heat_kernel_affinity(X: np.ndarray, k: int, width: float = 1.0) -> np.ndarray:
    """Fixed k-NN affinity exp(-d^2 / (2*width^2)), symmetrized; not row-normalized."""
    A = pairwise_sq_dists(X)
    n = A.shape[0]
    if k < 1 or k > n - 1:
        raise DataError(f"k={k} out of range [1, {n - 1}] for {n} points")
    work = A.copy()
    np.fill_diagonal(work, np.inf)
    order = np.argsort(work, axis=1, kind="stable")[:, :k]
    rows = np.arange(n)[:, None]
    W = np.zeros((n, n))
    W[rows, order] = np.exp(-np.take_along_axis(A, order, axis=1) / (2.0 * width * width))
    return (W + W.T) / 2.0
