"""Semi-supervised extensions: homogeneous (shared projection with balanced
centroid anchors) and heterogeneous (per-domain projections via block-diagonal
stacking). Both reduce to the standard-form engine in `solver`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import graphs
from .data import Dataset, SdaSplit
from .errors import DataError
from .solver import (
    Hyperparams,
    InitClassifier,
    ModelState,
    _StandardProblem,
    _fit_standard,
    _init_from_arrays,
    centroid_selector,
    densify_labels,
    onehot,
    update_anchor_weights,
)

__all__ = [
    "SemiState",
    "fit_sda_homogeneous",
    "fit_sda_heterogeneous",
    "update_anchor_weights",
]


@dataclass
class SemiState:
    """Final semi-supervised state: anchor weights plus the base fit state."""

    lambda1: float
    lambda2: float
    base: ModelState
    G_l: np.ndarray
    P_source: np.ndarray | None = None
    P_target: np.ndarray | None = None


def _prepare_split(
    source: Dataset, split: SdaSplit
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if source.labels is None:
        raise DataError("source dataset must be labeled")
    class_values = source.class_values
    ys = densify_labels(source.labels, class_values)
    if split.labeled is not None:
        if split.labeled.labels is None:
            raise DataError("labeled target part must carry labels")
        yl = densify_labels(split.labeled.labels, class_values)
    else:
        yl = np.empty(0, dtype=np.int64)
    return class_values, ys, yl, source.features.T


def fit_sda_homogeneous(
    source: Dataset,
    split: SdaSplit,
    hyper: Hyperparams | None = None,
    init: str | InitClassifier = "ridge",
    lambda_fixed: tuple[float, float] | None = None,
) -> tuple[SemiState, np.ndarray]:
    """Semi-supervised fit with a shared projection (equal feature dims).

    The labeled target rows keep their true assignment throughout; the anchor
    weights are re-optimized each iteration unless `lambda_fixed` pins them.
    With an empty labeled split the weights pin to (1, 0) automatically and
    the run is identical to `fit_uda`. Returns predictions (original class
    values) for the unlabeled target samples.
    """
    hyper = hyper or Hyperparams()
    if source.n_dims != split.unlabeled.n_dims or (
        split.labeled is not None and source.n_dims != split.labeled.n_dims
    ):
        raise DataError("homogeneous mode needs equal feature dims across domains")
    class_values, ys, yl, Xs_cols = _prepare_split(source, split)
    C = len(class_values)
    n_l = len(yl)

    target_rows = (
        np.vstack([split.labeled.features, split.unlabeled.features])
        if n_l
        else split.unlabeled.features
    )
    X = np.hstack([Xs_cols, target_rows.T])
    G_init = _init_from_arrays(source.features, ys, target_rows, C, init)

    problem = _StandardProblem(
        X=X,
        target_rows_orig=target_rows,
        n_s=source.n_samples,
        n_l=n_l,
        E_s=centroid_selector(ys, C),
        L_s=graphs.source_laplacian(ys).matrix,
        G_init=G_init,
        class_values=class_values,
        E_l=centroid_selector(yl, C) if n_l else None,
        G_l=onehot(yl, C) if n_l else None,
        lambda_fixed=(1.0, 0.0) if n_l == 0 else lambda_fixed,
    )
    state, preds_dense, (lam1, lam2) = _fit_standard(problem, hyper)
    semi = SemiState(lambda1=lam1, lambda2=lam2, base=state,
                     G_l=problem.G_l if n_l else np.zeros((0, C)))
    return semi, class_values[preds_dense - 1]


def fit_sda_heterogeneous(
    source: Dataset,
    split: SdaSplit,
    hyper: Hyperparams | None = None,
    init: str | InitClassifier = "ridge",
    lambda_fixed: tuple[float, float] | None = None,
) -> tuple[SemiState, np.ndarray]:
    """Semi-supervised fit with differing feature dims via block-diagonal stacking.

    The joined data is diag(X_s, X_t) and the stacked projection row-splits
    into per-domain projections (`P_source`, `P_target` on the result). The
    initial assignment comes from the labeled target rows, since a source
    classifier cannot score target features of a different dimension.
    """
    hyper = hyper or Hyperparams()
    class_values, ys, yl, Xs_cols = _prepare_split(source, split)
    C = len(class_values)
    n_l = len(yl)
    if n_l == 0:
        raise DataError("heterogeneous mode needs at least one labeled target sample")

    target_rows = np.vstack([split.labeled.features, split.unlabeled.features])
    m_s, m_t = source.n_dims, target_rows.shape[1]
    n_s, n_t = source.n_samples, target_rows.shape[0]
    X = np.zeros((m_s + m_t, n_s + n_t))
    X[:m_s, :n_s] = Xs_cols
    X[m_s:, n_s:] = target_rows.T

    G_init = _init_from_arrays(
        split.labeled.features, yl, target_rows, C, init
    )

    problem = _StandardProblem(
        X=X,
        target_rows_orig=target_rows,
        n_s=n_s,
        n_l=n_l,
        E_s=centroid_selector(ys, C),
        L_s=graphs.source_laplacian(ys).matrix,
        G_init=G_init,
        class_values=class_values,
        E_l=centroid_selector(yl, C),
        G_l=onehot(yl, C),
        lambda_fixed=lambda_fixed,
    )
    state, preds_dense, (lam1, lam2) = _fit_standard(problem, hyper)
    semi = SemiState(
        lambda1=lam1,
        lambda2=lam2,
        base=state,
        G_l=problem.G_l,
        P_source=state.P[:m_s],
        P_target=state.P[m_s:],
    )
    return semi, class_values[preds_dense - 1]
