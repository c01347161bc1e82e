import numpy as np
import pytest

from cmms.data import Dataset, SdaSplit, split_sda
from cmms.errors import DataError
from cmms.evaluation import accuracy
from cmms.graphs import source_laplacian
from cmms.semi import fit_sda_heterogeneous, fit_sda_homogeneous, update_anchor_weights
from cmms.solver import Hyperparams, centroid_selector, fit_uda
from cmms.synth import gaussian_shift_task, heterogeneous_task


def _random_anchor_instance(seed):
    rng = np.random.default_rng(seed)
    m, d, C, n_s, n_l = 6, 3, 3, 14, 6
    X_s = rng.standard_normal((m, n_s))
    X_l = rng.standard_normal((m, n_l))
    E_s = centroid_selector(np.concatenate([[1, 2, 3], rng.integers(1, 4, n_s - 3)]), C)
    E_l = centroid_selector(np.tile([1, 2, 3], n_l // 3), C)
    P = rng.standard_normal((m, d))
    F = rng.standard_normal((d, C))
    return P, X_s, E_s, X_l, E_l, F


def test_anchor_weights_source_match_gives_one():
    P, X_s, E_s, X_l, E_l, _ = _random_anchor_instance(0)
    F = P.T @ X_s @ E_s
    lam1, lam2 = update_anchor_weights(P, X_s, E_s, X_l, E_l, F)
    assert lam1 == 1.0 and lam2 == 0.0


def test_anchor_weights_labeled_match_gives_zero():
    P, X_s, E_s, X_l, E_l, _ = _random_anchor_instance(1)
    F = P.T @ X_l @ E_l
    lam1, lam2 = update_anchor_weights(P, X_s, E_s, X_l, E_l, F)
    assert abs(lam1) < 1e-12 and abs(lam2 - 1.0) < 1e-12


def test_anchor_weights_degenerate_midpoint():
    P, X_s, E_s, _, _, F = _random_anchor_instance(2)
    lam1, lam2 = update_anchor_weights(P, X_s, E_s, X_s, E_s, F)  # J = 0
    assert lam1 == 0.5 and lam2 == 0.5


def test_anchor_weights_match_grid_oracle():
    for seed in range(50):
        P, X_s, E_s, X_l, E_l, F = _random_anchor_instance(100 + seed)
        lam1, _ = update_anchor_weights(P, X_s, E_s, X_l, E_l, F)
        A = P.T @ X_s @ E_s
        Bm = P.T @ X_l @ E_l
        grid = np.linspace(0.0, 1.0, 10001)
        costs = [((g * A + (1 - g) * Bm - F) ** 2).sum() for g in grid]
        best = grid[int(np.argmin(costs))]
        assert abs(lam1 - best) <= 1e-4 + 1e-12
        assert 0.0 <= lam1 <= 1.0


def test_sda_reduction_matches_uda_exactly():
    src, tgt = gaussian_shift_task(30, shift=2.2, n_per_class_target=25)
    hyper = Hyperparams(d=4, k=6, max_iter=6, alpha=0.1, beta=0.1)
    state_u, pred_u = fit_uda(src, tgt, hyper)
    split = SdaSplit(labeled=None, unlabeled=tgt, per_class_count=0)
    semi, pred_s = fit_sda_homogeneous(src, split, hyper, lambda_fixed=(1.0, 0.0))
    assert np.array_equal(pred_u, pred_s)
    assert state_u.objective_trace == semi.base.objective_trace
    assert np.array_equal(state_u.P, semi.base.P)
    assert semi.lambda1 == 1.0 and semi.lambda2 == 0.0


def test_sda_labeled_rows_never_reassigned():
    src, tgt = gaussian_shift_task(31, shift=2.6)
    split = split_sda(tgt, per_class=3, seed=0)
    hyper = Hyperparams(d=4, k=6, max_iter=6, alpha=0.2, beta=0.1)
    semi, _ = fit_sda_homogeneous(src, split, hyper)
    n_l = split.labeled.n_samples
    assert np.array_equal(semi.base.G_t[:n_l], semi.G_l)
    assert abs(semi.lambda1 + semi.lambda2 - 1.0) < 1e-12
    assert 0.0 <= semi.lambda1 <= 1.0


def test_sda_monotone_objective():
    src, tgt = gaussian_shift_task(32, shift=2.4)
    split = split_sda(tgt, per_class=2, seed=1)
    hyper = Hyperparams(d=4, k=6, max_iter=8, alpha=0.2, beta=0.1)
    semi, _ = fit_sda_homogeneous(src, split, hyper)
    trace = np.asarray(semi.base.objective_trace)
    assert (np.diff(trace) <= 1e-9 * np.abs(trace[:-1])).all()


def test_sda_labels_help_paired_run():
    # paired-run oracle, seed pinned: SDA with 2 labels/class must not lose to
    # UDA on the same unlabeled samples (seed 12: 85.06 -> 94.83)
    src, tgt = gaussian_shift_task(12, shift=2.6)
    split = split_sda(tgt, per_class=2, seed=0)
    hyper = Hyperparams(d=5, k=8, max_iter=10, alpha=0.1, beta=0.1)
    _, pred_uda = fit_uda(src, tgt, hyper)
    uda_on_unlabeled = accuracy(
        pred_uda[split.unlabeled_indices], tgt.labels[split.unlabeled_indices]
    )
    semi, pred_sda = fit_sda_homogeneous(src, split, hyper)
    sda_acc = accuracy(pred_sda, split.unlabeled.labels)
    assert sda_acc >= uda_on_unlabeled


def test_sda_requires_matching_dims():
    src = Dataset(np.ones((4, 3)), np.array([1, 1, 2, 2]))
    tgt = Dataset(np.random.default_rng(0).standard_normal((6, 4)), np.array([1, 1, 1, 2, 2, 2]))
    split = SdaSplit(labeled=None, unlabeled=tgt, per_class_count=0)
    with pytest.raises(DataError):
        fit_sda_homogeneous(src, split)


def test_hetero_block_consistency_identity():
    # equal dims, block-embedded: the joined Laplacian trace decomposes into
    # the two per-domain terms
    rng = np.random.default_rng(33)
    m, n_s, n_t, d = 5, 12, 9, 3
    X_s = rng.standard_normal((m, n_s))
    X_t = rng.standard_normal((m, n_t))
    ys = np.concatenate([[1, 2, 3], rng.integers(1, 4, n_s - 3)])
    L_s = source_laplacian(ys).matrix
    S = rng.uniform(size=(n_t, n_t))
    np.fill_diagonal(S, 0)
    S /= S.sum(axis=1, keepdims=True)
    from cmms.graphs import laplacian_from_similarity

    L_t = laplacian_from_similarity(S)
    X_blk = np.zeros((2 * m, n_s + n_t))
    X_blk[:m, :n_s] = X_s
    X_blk[m:, n_s:] = X_t
    P_s = rng.standard_normal((m, d))
    P_t = rng.standard_normal((m, d))
    P_blk = np.vstack([P_s, P_t])
    L_joined = np.zeros((n_s + n_t, n_s + n_t))
    L_joined[:n_s, :n_s] = 2 * L_s
    L_joined[n_s:, n_s:] = 2 * L_t
    joined = np.trace(P_blk.T @ X_blk @ L_joined @ X_blk.T @ P_blk)
    split_terms = 2 * np.trace(P_s.T @ X_s @ L_s @ X_s.T @ P_s) + 2 * np.trace(
        P_t.T @ X_t @ L_t @ X_t.T @ P_t
    )
    assert abs(joined - split_terms) < 1e-10 * max(1.0, abs(split_terms))
    # the stacked norm matches the per-domain regularizers too
    assert abs((P_blk**2).sum() - ((P_s**2).sum() + (P_t**2).sum())) < 1e-12


def test_hetero_end_to_end_accuracy():
    src, tgt = heterogeneous_task(5, dim_source=20, dim_target=35)
    split = split_sda(tgt, per_class=3, seed=1)
    hyper = Hyperparams(d=4, k=6, max_iter=10, alpha=0.1, beta=0.1)
    semi, pred = fit_sda_heterogeneous(src, split, hyper)
    acc = accuracy(pred, split.unlabeled.labels)
    assert acc >= 90.0
    assert semi.P_source.shape[0] == 20
    assert semi.P_target.shape[0] == 35
    trace = np.asarray(semi.base.objective_trace)
    assert (np.diff(trace) <= 1e-9 * np.abs(trace[:-1])).all()


def test_hetero_needs_labeled_target():
    src, tgt = heterogeneous_task(6)
    split = SdaSplit(labeled=None, unlabeled=tgt, per_class_count=0)
    with pytest.raises(DataError):
        fit_sda_heterogeneous(src, split)
