"""Core alternating solver: joint-matrix assembly, the four subproblem
updates, objective evaluation, and the unsupervised fit loop.

Data layout: joined matrix X is m x n with columns = samples, source first.
The same engine drives the unsupervised and semi-supervised modes; the
unsupervised fit is the degenerate case with no labeled target rows and the
anchor weights pinned at (1, 0).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from . import graphs
from .data import Dataset
from .errors import DataError
from .numerics import EigResult, gen_eig_smallest
from .graphs import SourceLaplacian, TargetGraph

logger = logging.getLogger(__name__)

VARIANTS = ("full", "cm", "rm", "pa", "ds", "op")

RIDGE_REG = 1.0


@dataclass
class Hyperparams:
    """Solver hyperparameters; defaults follow the benchmark protocol."""

    alpha: float = 0.1
    beta: float = 0.1
    gamma: float = 5.0
    d: int = 100
    k: int = 10
    max_iter: int = 10
    tol: float = 1e-6
    variant: str = "full"
    rescale_delta_each_iter: bool = False
    heat_width: float = 1.0

    def validate(self) -> None:
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise DataError("alpha, beta, gamma must be nonnegative")
        if self.d < 1 or self.k < 1 or self.max_iter < 1:
            raise DataError("d, k, max_iter must be >= 1")
        if self.tol < 0:
            raise DataError("tol must be nonnegative")
        if self.variant not in VARIANTS:
            raise DataError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")

    def replace(self, **kwargs) -> "Hyperparams":
        params = {**self.__dict__, **kwargs}
        return Hyperparams(**params)


@dataclass
class ConstantMatrices:
    """Per-run constants of the joined standard form."""

    X: np.ndarray
    n_s: int
    n_t: int
    E_s: np.ndarray
    source_laplacian: SourceLaplacian
    class_values: np.ndarray
    labels_src: np.ndarray

    @property
    def n(self) -> int:
        return self.n_s + self.n_t

    @property
    def E(self) -> np.ndarray:
        """Joined centroid selector [E_s; 0]."""
        E = np.zeros((self.n, self.E_s.shape[1]))
        E[: self.n_s] = self.E_s
        return E

    @property
    def V(self) -> np.ndarray:
        """Diagonal target selector diag(0, I)."""
        return np.diag(self.v_diag)

    @property
    def v_diag(self) -> np.ndarray:
        v = np.zeros(self.n)
        v[self.n_s :] = 1.0
        return v

    @property
    def H(self) -> np.ndarray:
        """Centering matrix I - (1/n) * ones."""
        return np.eye(self.n) - np.full((self.n, self.n), 1.0 / self.n)


@dataclass
class ModelState:
    """Mutable optimization state of one fit."""

    P: np.ndarray
    F: np.ndarray
    G_t: np.ndarray
    graph: TargetGraph | None
    objective_trace: list[float] = field(default_factory=list)
    iteration: int = 0
    empty_clusters: list[tuple[int, int]] = field(default_factory=list)


def densify_labels(values: np.ndarray, class_values: np.ndarray) -> np.ndarray:
    """Map arbitrary integer class values onto dense 1..C indices."""
    values = np.asarray(values)
    idx = np.searchsorted(class_values, values)
    bad = (idx >= len(class_values)) | (class_values[np.minimum(idx, len(class_values) - 1)] != values)
    if bad.any():
        raise DataError(f"label value {values[bad][0]} not present in the source classes")
    return (idx + 1).astype(np.int64)


def centroid_selector(labels_dense: np.ndarray, C: int) -> np.ndarray:
    """Selector with entry 1/n_c on class-c rows so X @ selector gives class means."""
    n = len(labels_dense)
    E = np.zeros((n, C))
    for c in range(1, C + 1):
        idx = np.flatnonzero(labels_dense == c)
        if len(idx):
            E[idx, c - 1] = 1.0 / len(idx)
    return E


def onehot(labels_dense: np.ndarray, C: int) -> np.ndarray:
    G = np.zeros((len(labels_dense), C))
    G[np.arange(len(labels_dense)), labels_dense - 1] = 1.0
    return G


def assemble_constants(source: Dataset, target: Dataset) -> ConstantMatrices:
    """Join the domains into the standard-form constants (source labels required)."""
    if source.labels is None:
        raise DataError("source dataset must be labeled")
    if source.n_dims != target.n_dims:
        raise DataError(
            f"feature dims differ: source {source.n_dims}, target {target.n_dims}"
        )
    class_values = source.class_values
    ys = densify_labels(source.labels, class_values)
    X = np.hstack([source.features.T, target.features.T])
    return ConstantMatrices(
        X=X,
        n_s=source.n_samples,
        n_t=target.n_samples,
        E_s=centroid_selector(ys, len(class_values)),
        source_laplacian=graphs.source_laplacian(ys),
        class_values=class_values,
        labels_src=ys,
    )


def _ridge_onevsrest(
    X_train: np.ndarray, y_dense: np.ndarray, X_test: np.ndarray, C: int
) -> np.ndarray:
    """One-vs-rest ridge scores (centered, intercept via means), ridge = 1.0."""
    mu = X_train.mean(axis=0)
    Xc = X_train - mu
    Y = onehot(y_dense, C)
    ymu = Y.mean(axis=0)
    m = X_train.shape[1]
    aug = np.vstack([Xc, np.sqrt(RIDGE_REG) * np.eye(m)])
    rhs = np.vstack([Y - ymu, np.zeros((m, C))])
    W, *_ = linalg.lstsq(aug, rhs)
    return (X_test - mu) @ W + ymu


def _nearest_centroid_scores(
    X_train: np.ndarray, y_dense: np.ndarray, X_test: np.ndarray, C: int
) -> np.ndarray:
    means = np.vstack(
        [X_train[y_dense == c].mean(axis=0) for c in range(1, C + 1)]
    )
    d2 = ((X_test[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    return -d2


InitClassifier = Callable[[np.ndarray, np.ndarray, np.ndarray, int], np.ndarray]


def init_labels(
    source: Dataset, target: Dataset, method: str | InitClassifier = "ridge"
) -> np.ndarray:
    """Initial one-hot target assignment from a baseline classifier on the source.

    `method` is "ridge" (one-vs-rest ridge regression, the default),
    "centroid" (nearest class centroid), or a callable
    (X_train, y_dense, X_test, C) -> one-hot assignment. Score ties resolve
    to the lower class index.
    """
    if source.labels is None:
        raise DataError("source dataset must be labeled")
    class_values = source.class_values
    C = len(class_values)
    ys = densify_labels(source.labels, class_values)
    return _init_from_arrays(source.features, ys, target.features, C, method)


def _init_from_arrays(
    X_train: np.ndarray,
    y_dense: np.ndarray,
    X_test: np.ndarray,
    C: int,
    method: str | InitClassifier = "ridge",
) -> np.ndarray:
    if callable(method):
        G = np.asarray(method(X_train, y_dense, X_test, C), dtype=np.float64)
        if G.shape != (X_test.shape[0], C):
            raise DataError("init classifier must return a one-hot (n_t x C) matrix")
        return G
    if method == "ridge":
        scores = _ridge_onevsrest(X_train, y_dense, X_test, C)
        if not np.isfinite(scores).all():
            logger.warning("ridge initialization failed (singular system); "
                           "falling back to nearest-centroid")
            scores = _nearest_centroid_scores(X_train, y_dense, X_test, C)
    elif method == "centroid":
        scores = _nearest_centroid_scores(X_train, y_dense, X_test, C)
    else:
        raise DataError(f"unknown init method {method!r}")
    return onehot(np.argmax(scores, axis=1) + 1, C)


def matching_quadratic(
    E: np.ndarray, v_diag: np.ndarray, G: np.ndarray, alpha: float
) -> np.ndarray:
    """The n x n quadratic form left after eliminating the centroids.

    R = E E^T + alpha * diag(v) - N K^{-1} N^T with N = E + alpha * diag(v) G
    and K = I_C + alpha * G^T G, so that tr(P^T X R X^T P) equals the
    centroid-matching plus clustering terms at the optimal centroids.
    """
    E = np.asarray(E, dtype=np.float64)
    G = np.asarray(G, dtype=np.float64)
    v = np.asarray(v_diag, dtype=np.float64)
    N = E + alpha * (v[:, None] * G)
    K = np.eye(E.shape[1]) + alpha * (G.T @ G)
    R = E @ E.T + alpha * np.diag(v) - N @ linalg.solve(K, N.T, assume_a="pos")
    return (R + R.T) / 2.0


def _projection_lhs(
    X: np.ndarray,
    n_s: int,
    E: np.ndarray,
    G_t: np.ndarray,
    L_src_term: np.ndarray,
    L_t_block: np.ndarray | None,
    hyper: Hyperparams,
    gamma: float,
) -> np.ndarray:
    """Left-hand matrix X R X^T + gamma X L X^T + beta I, assembled factored."""
    m = X.shape[0]
    X_t = X[:, n_s:]
    XE = X @ E
    XN = XE + hyper.alpha * (X_t @ G_t)
    Kdiag = 1.0 + hyper.alpha * G_t.sum(axis=0)
    A = XE @ XE.T + hyper.alpha * (X_t @ X_t.T) - (XN / Kdiag) @ XN.T
    if gamma != 0.0:
        A = A + gamma * L_src_term
        if L_t_block is not None:
            A = A + gamma * 2.0 * (X_t @ L_t_block @ X_t.T)
    A[np.diag_indices(m)] += hyper.beta
    return (A + A.T) / 2.0


def update_projection(
    X: np.ndarray,
    n_s: int,
    E: np.ndarray,
    G_t: np.ndarray,
    L_s: np.ndarray,
    L_t_block: np.ndarray | None,
    B: np.ndarray,
    hyper: Hyperparams,
    gamma: float | None = None,
) -> EigResult:
    """Solve the projection subproblem for the d smallest-cost directions."""
    gamma = hyper.gamma if gamma is None else gamma
    X_s = X[:, :n_s]
    L_src_term = 2.0 * (X_s @ L_s @ X_s.T)
    A = _projection_lhs(X, n_s, E, G_t, L_src_term, L_t_block, hyper, gamma)
    return gen_eig_smallest(A, B, hyper.d)


def update_centroids(
    P: np.ndarray, X: np.ndarray, n_s: int, E: np.ndarray, G_t: np.ndarray, alpha: float
) -> np.ndarray:
    """Closed-form optimal centroids (P^T X E + alpha P^T X_t G_t) K^{-1}."""
    PtX = P.T @ X
    Kdiag = 1.0 + alpha * G_t.sum(axis=0)
    return (PtX @ E + alpha * (PtX[:, n_s:] @ G_t)) / Kdiag


def assign_clusters(P: np.ndarray, X_t: np.ndarray, F: np.ndarray) -> np.ndarray:
    """One-hot nearest-centroid assignment of projected target columns.

    Distance ties resolve to the lower cluster index.
    """
    Z = P.T @ X_t
    d2 = (
        np.einsum("ij,ij->j", Z, Z)[:, None]
        + np.einsum("ij,ij->j", F, F)[None, :]
        - 2.0 * (Z.T @ F)
    )
    return onehot(np.argmin(d2, axis=1) + 1, F.shape[1])


def centering_gram(X: np.ndarray) -> np.ndarray:
    """X H X^T without materializing the n x n centering matrix."""
    xs = X.sum(axis=1)
    B = X @ X.T - np.outer(xs, xs) / X.shape[1]
    return (B + B.T) / 2.0


def _objective_terms(
    X: np.ndarray,
    n_s: int,
    E: np.ndarray,
    P: np.ndarray,
    F: np.ndarray,
    G_t: np.ndarray,
    L_s: np.ndarray,
    L_t_block: np.ndarray | None,
    S: np.ndarray | None,
    delta: float,
    hyper: Hyperparams,
    gamma: float,
    include_s_norm: bool,
) -> float:
    PtX = P.T @ X
    match = float(((PtX @ E - F) ** 2).sum())
    cluster = float(((PtX[:, n_s:] - F @ G_t.T) ** 2).sum())
    reg = float((P**2).sum())
    manifold = 0.0
    if gamma != 0.0:
        Zs = PtX[:, :n_s]
        manifold += 2.0 * float(np.einsum("ij,jk,ik->", Zs, L_s, Zs))
        if L_t_block is not None:
            Zt = PtX[:, n_s:]
            manifold += 2.0 * float(np.einsum("ij,jk,ik->", Zt, L_t_block, Zt))
        if include_s_norm and S is not None:
            manifold += delta * float((S**2).sum())
    return match + hyper.alpha * cluster + hyper.beta * reg + gamma * manifold


def objective_value(
    state: ModelState, consts: ConstantMatrices, hyper: Hyperparams
) -> float:
    """Evaluate the full objective for an unsupervised-state snapshot."""
    gamma = 0.0 if hyper.variant == "cm" else hyper.gamma
    graph = state.graph
    if hyper.variant in ("full", "cm", "op", "pa"):
        L_t_block = graph.L_t if graph is not None else None
        S = graph.S if graph is not None else None
        delta = graph.delta if graph is not None else 0.0
    elif hyper.variant == "ds":
        L_t_block = graphs.scatter_laplacian_from_onehot(state.G_t)
        S, delta = None, 0.0
    else:
        L_t_block, S, delta = None, None, 0.0
    return _objective_terms(
        consts.X,
        consts.n_s,
        consts.E,
        state.P,
        state.F,
        state.G_t,
        consts.source_laplacian.matrix,
        L_t_block,
        S,
        delta,
        hyper,
        gamma,
        include_s_norm=hyper.variant in ("full", "cm", "op"),
    )


@dataclass
class _StandardProblem:
    """Inputs of one standard-form fit (shared by UDA and both SDA modes)."""

    X: np.ndarray
    target_rows_orig: np.ndarray
    n_s: int
    n_l: int
    E_s: np.ndarray
    L_s: np.ndarray
    G_init: np.ndarray
    class_values: np.ndarray
    E_l: np.ndarray | None = None
    G_l: np.ndarray | None = None
    lambda_fixed: tuple[float, float] | None = (1.0, 0.0)


def update_anchor_weights(
    P: np.ndarray,
    X_s: np.ndarray,
    E_s: np.ndarray,
    X_l: np.ndarray,
    E_l: np.ndarray,
    F: np.ndarray,
) -> tuple[float, float]:
    """Closed-form balance between source and labeled-target centroid anchors."""
    A = P.T @ (X_s @ E_s)
    Bm = P.T @ (X_l @ E_l)
    J = A - Bm
    M = F - Bm
    den = float((J * J).sum())
    if den < 1e-12:
        return 0.5, 0.5
    lam1 = float(np.clip((J * M).sum() / den, 0.0, 1.0))
    return lam1, 1.0 - lam1


def _fit_standard(
    problem: _StandardProblem, hyper: Hyperparams
) -> tuple[ModelState, np.ndarray, tuple[float, float]]:
    """Run the alternating loop on a standard-form problem.

    Returns the final state, dense 1..C predictions for the free (unlabeled)
    target rows, and the final anchor weights.
    """
    hyper.validate()
    X = problem.X
    n = X.shape[1]
    n_s, n_l = problem.n_s, problem.n_l
    n_t = n - n_s
    C = problem.E_s.shape[1]
    variant = hyper.variant
    gamma = 0.0 if variant == "cm" else hyper.gamma
    X_t = X[:, n_s:]
    X_l = X[:, n_s : n_s + n_l]

    B = centering_gram(X)
    L_src_term = 2.0 * (X[:, :n_s] @ problem.L_s @ X[:, :n_s].T)

    graph: TargetGraph | None = None
    if variant in ("full", "cm", "op"):
        dists0 = graphs.pairwise_sq_dists(problem.target_rows_orig)
        delta = graphs.estimate_delta(dists0, hyper.k)
        graph = TargetGraph.from_distances(dists0, hyper.k, delta)
    elif variant == "pa":
        W = graphs.heat_kernel_affinity(problem.target_rows_orig, hyper.k, hyper.heat_width)
        graph = TargetGraph(
            S=W, delta=0.0, k=hyper.k, L_t=graphs.laplacian_from_similarity(W)
        )

    G_t = problem.G_init.copy()
    if n_l:
        G_t[:n_l] = problem.G_l

    if problem.lambda_fixed is not None:
        lam1, lam2 = problem.lambda_fixed
    else:
        lam1, lam2 = 0.5, 0.5

    def build_E(l1: float, l2: float) -> np.ndarray:
        E = np.zeros((n, C))
        E[:n_s] = l1 * problem.E_s
        if n_l:
            E[n_s : n_s + n_l] = l2 * problem.E_l
        return E

    def target_laplacian() -> np.ndarray | None:
        if variant in ("full", "cm", "op", "pa"):
            return graph.L_t
        if variant == "ds":
            return graphs.scatter_laplacian_from_onehot(G_t)
        return None

    state = ModelState(
        P=np.zeros((X.shape[0], 0)), F=np.zeros((0, C)), G_t=G_t, graph=graph
    )
    prev_G: np.ndarray | None = None
    for it in range(1, hyper.max_iter + 1):
        E = build_E(lam1, lam2)
        L_t_block = target_laplacian()

        A = _projection_lhs(X, n_s, E, G_t, L_src_term, L_t_block, hyper, gamma)
        eig = gen_eig_smallest(A, B, hyper.d)
        P = eig.vectors

        F = update_centroids(P, X, n_s, E, G_t, hyper.alpha)

        if problem.lambda_fixed is None and n_l:
            lam1, lam2 = update_anchor_weights(
                P, X[:, :n_s], problem.E_s, X_l, problem.E_l, F
            )
            E = build_E(lam1, lam2)

        G_t = assign_clusters(P, X_t, F)
        if n_l:
            G_t[:n_l] = problem.G_l

        empty = np.flatnonzero(G_t.sum(axis=0) == 0)
        for c in empty:
            state.empty_clusters.append((it, int(c) + 1))
            logger.info("iteration %d: cluster %d is empty", it, c + 1)

        if variant in ("full", "cm"):
            proj_dists = graphs.pairwise_sq_dists((P.T @ X_t).T)
            delta_now = (
                graphs.estimate_delta(proj_dists, hyper.k)
                if hyper.rescale_delta_each_iter
                else graph.delta
            )
            graph = TargetGraph.from_distances(proj_dists, hyper.k, delta_now)

        obj = _objective_terms(
            X,
            n_s,
            E,
            P,
            F,
            G_t,
            problem.L_s,
            target_laplacian(),
            graph.S if graph is not None else None,
            graph.delta if graph is not None else 0.0,
            hyper,
            gamma,
            include_s_norm=variant in ("full", "cm", "op"),
        )

        state.P, state.F, state.G_t, state.graph = P, F, G_t, graph
        state.objective_trace.append(obj)
        state.iteration = it

        g_converged = prev_G is not None and np.array_equal(G_t, prev_G)
        obj_converged = (
            len(state.objective_trace) >= 2
            and state.objective_trace[-2] - obj
            <= hyper.tol * abs(state.objective_trace[-2])
        )
        prev_G = G_t.copy()
        if g_converged or obj_converged:
            break

    preds_dense = np.argmax(state.G_t[n_l:], axis=1) + 1
    return state, preds_dense, (lam1, lam2)


def fit_uda(
    source: Dataset,
    target: Dataset,
    hyper: Hyperparams | None = None,
    init: str | InitClassifier = "ridge",
) -> tuple[ModelState, np.ndarray]:
    """Fit the unsupervised adaptation model and label the target domain.

    Inputs are expected standardized (the CLI applies z-scoring). Returns the
    final state and predicted labels in the source's original class values.
    """
    hyper = hyper or Hyperparams()
    consts = assemble_constants(source, target)
    C = len(consts.class_values)
    G_init = _init_from_arrays(
        source.features, consts.labels_src, target.features, C, init
    )
    problem = _StandardProblem(
        X=consts.X,
        target_rows_orig=target.features,
        n_s=consts.n_s,
        n_l=0,
        E_s=consts.E_s,
        L_s=consts.source_laplacian.matrix,
        G_init=G_init,
        class_values=consts.class_values,
        lambda_fixed=(1.0, 0.0),
    )
    state, preds_dense, _ = _fit_standard(problem, hyper)
    return state, consts.class_values[preds_dense - 1]
