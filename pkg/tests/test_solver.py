import numpy as np
import pytest
from scipy import linalg

from cmms.data import Dataset
from cmms.errors import DataError
from cmms.graphs import estimate_delta, pairwise_sq_dists, update_similarity
from cmms.solver import (
    Hyperparams,
    assemble_constants,
    assign_clusters,
    centering_gram,
    densify_labels,
    fit_uda,
    init_labels,
    matching_quadratic,
    onehot,
    update_centroids,
    update_projection,
)
from cmms.synth import gaussian_shift_task


def small_instance(seed=0, n_s=12, n_t=9, m=5, C=3):
    rng = np.random.default_rng(seed)
    ys = np.concatenate([np.arange(1, C + 1), rng.integers(1, C + 1, n_s - C)])
    yt = np.concatenate([np.arange(1, C + 1), rng.integers(1, C + 1, n_t - C)])
    src = Dataset(rng.standard_normal((n_s, m)), ys)
    tgt = Dataset(rng.standard_normal((n_t, m)), yt)
    return src, tgt


def test_assemble_constants_tiny_example():
    src = Dataset(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1, 1]))
    tgt = Dataset(np.array([[2.0, 2.0]]))
    consts = assemble_constants(src, tgt)
    assert np.allclose(consts.E, [[0.5], [0.5], [0.0]])
    assert np.allclose(np.diag(consts.V), [0.0, 0.0, 1.0])
    assert consts.X.shape == (2, 3)


def test_assemble_constants_class_mean_identity():
    src, tgt = small_instance(1)
    consts = assemble_constants(src, tgt)
    XE = consts.X @ consts.E
    for c in range(1, 4):
        mean = src.features[src.labels == c].mean(axis=0)
        assert np.abs(XE[:, c - 1] - mean).max() < 1e-12


def test_assemble_constants_centering_annihilates_ones():
    src, tgt = small_instance(2)
    consts = assemble_constants(src, tgt)
    assert np.abs(consts.H @ np.ones(consts.n)).max() < 1e-12
    # and the implicit Gram agrees with the materialized one
    direct = consts.X @ consts.H @ consts.X.T
    assert np.abs(centering_gram(consts.X) - direct).max() < 1e-10


def test_assemble_constants_dim_mismatch():
    src = Dataset(np.ones((2, 3)), np.array([1, 2]))
    tgt = Dataset(np.ones((2, 4)))
    with pytest.raises(DataError):
        assemble_constants(src, tgt)
    with pytest.raises(DataError):
        assemble_constants(Dataset(np.ones((2, 3))), Dataset(np.ones((2, 3))))


def test_init_labels_separable_case():
    rng = np.random.default_rng(3)
    Xs = np.vstack([rng.standard_normal((20, 4)) + 8, rng.standard_normal((20, 4)) - 8])
    ys = np.repeat([1, 2], 20)
    Xt = Xs + 0.1
    G = init_labels(Dataset(Xs, ys), Dataset(Xt))
    assert np.array_equal(np.argmax(G, axis=1) + 1, ys)


def test_init_labels_tie_breaks_to_lower_class():
    # classifier scores are exactly symmetric for a sample at the midpoint
    Xs = np.array([[1.0], [-1.0]])
    ys = np.array([1, 2])
    G = init_labels(Dataset(Xs, ys), Dataset(np.array([[0.0]])))
    assert G[0, 0] == 1.0


def test_init_labels_matches_normal_equations_oracle():
    rng = np.random.default_rng(4)
    centers = np.array([[4.0, 0.0, 0], [0, 4.0, 0], [0, 0, 4.0]])
    Xs = np.vstack([centers[c] + rng.standard_normal((15, 3)) for c in range(3)])
    ys = np.repeat([1, 2, 3], 15)
    Xt = np.vstack([centers[c] + 0.4 + rng.standard_normal((10, 3)) for c in range(3)])
    G = init_labels(Dataset(Xs, ys), Dataset(Xt))
    # oracle: brute-force ridge via the normal equations
    mu = Xs.mean(axis=0)
    Xc = Xs - mu
    Y = onehot(ys, 3)
    ymu = Y.mean(axis=0)
    W = linalg.solve(Xc.T @ Xc + np.eye(3), Xc.T @ (Y - ymu))
    scores = (Xt - mu) @ W + ymu
    assert np.array_equal(np.argmax(G, axis=1), np.argmax(scores, axis=1))


def test_init_labels_centroid_method():
    src, tgt = small_instance(5)
    G = init_labels(src, tgt, method="centroid")
    assert G.shape == (tgt.n_samples, 3)
    assert (G.sum(axis=1) == 1).all()


def test_matching_quadratic_alpha_zero_is_zero():
    src, tgt = small_instance(6)
    consts = assemble_constants(src, tgt)
    G = np.zeros((consts.n, 3))
    G[consts.n_s :] = onehot(densify_labels(tgt.labels, consts.class_values), 3)
    R = matching_quadratic(consts.E, consts.v_diag, G, alpha=0.0)
    assert np.abs(R).max() < 1e-12


def test_matching_quadratic_trace_identity():
    # tr(P^T X R X^T P) equals the two matching terms at the optimal centroids
    rng = np.random.default_rng(7)
    for trial in range(10):
        src, tgt = small_instance(100 + trial)
        consts = assemble_constants(src, tgt)
        alpha = rng.uniform(0.05, 2.0)
        G = np.zeros((consts.n, 3))
        G[consts.n_s :] = onehot(rng.integers(1, 4, consts.n_t), 3)
        P = rng.standard_normal((consts.X.shape[0], 4))
        R = matching_quadratic(consts.E, consts.v_diag, G, alpha)
        got = np.trace(P.T @ consts.X @ R @ consts.X.T @ P)
        PtX = P.T @ consts.X
        K = np.eye(3) + alpha * (G.T @ G)
        F = (PtX @ consts.E + alpha * PtX @ (consts.v_diag[:, None] * G)) @ linalg.inv(K)
        expect = ((PtX @ consts.E - F) ** 2).sum() + alpha * (
            (PtX @ np.diag(consts.v_diag) - F @ G.T) ** 2
        ).sum()
        assert abs(got - expect) < 1e-9 * max(1.0, abs(expect))


def test_matching_quadratic_is_psd():
    rng = np.random.default_rng(8)
    for trial in range(5):
        src, tgt = small_instance(200 + trial)
        consts = assemble_constants(src, tgt)
        G = np.zeros((consts.n, 3))
        G[consts.n_s :] = onehot(rng.integers(1, 4, consts.n_t), 3)
        R = matching_quadratic(consts.E, consts.v_diag, G, rng.uniform(0.1, 1.0))
        assert linalg.eigvalsh(R).min() > -1e-9


def test_update_projection_pca_like_reduction():
    # alpha = 0 (R = 0) and gamma = 0 reduce the pencil to (beta I, X H X^T):
    # the solution spans the top-variance directions of the centered data
    src, tgt = small_instance(9, n_s=20, n_t=15, m=6)
    consts = assemble_constants(src, tgt)
    hyper = Hyperparams(alpha=0.0, beta=0.5, gamma=0.0, d=3, k=3, max_iter=1)
    G = np.zeros((consts.n, 3))
    G[consts.n_s :] = onehot(np.ones(consts.n_t, dtype=np.int64), 3)
    B = centering_gram(consts.X)
    res = update_projection(
        consts.X, consts.n_s, consts.E, G[consts.n_s :], consts.source_laplacian.matrix,
        None, B, hyper, gamma=0.0,
    )
    P = res.vectors
    assert np.abs(P.T @ B @ P - np.eye(3)).max() < 1e-6
    w, U = linalg.eigh(B)
    top = U[:, ::-1][:, :3]
    # P's columns live in the top-variance subspace
    proj = top @ top.T @ P
    assert np.abs(proj - P).max() < 1e-8


def test_update_projection_constraint_and_minimality():
    rng = np.random.default_rng(10)
    src, tgt = small_instance(11, n_s=18, n_t=12, m=12)
    consts = assemble_constants(src, tgt)
    hyper = Hyperparams(alpha=0.3, beta=0.2, gamma=1.5, d=3, k=4, max_iter=1)
    G_t = onehot(rng.integers(1, 4, consts.n_t), 3)
    A_dists = pairwise_sq_dists(tgt.features)
    S = update_similarity(A_dists, 4, estimate_delta(A_dists, 4))
    from cmms.graphs import laplacian_from_similarity

    L_t = laplacian_from_similarity(S)
    B = centering_gram(consts.X)
    res = update_projection(
        consts.X, consts.n_s, consts.E, G_t, consts.source_laplacian.matrix,
        L_t, B, hyper,
    )
    P = res.vectors
    assert np.abs(P.T @ B @ P - np.eye(res.effective_d)).max() < 1e-6
    # objective value of the returned frame vs 500 random feasible frames
    R = matching_quadratic(
        consts.E, consts.v_diag, np.vstack([np.zeros((consts.n_s, 3)), G_t]), hyper.alpha
    )
    L_joined = np.zeros((consts.n, consts.n))
    L_joined[: consts.n_s, : consts.n_s] = 2 * consts.source_laplacian.matrix
    L_joined[consts.n_s :, consts.n_s :] = 2 * L_t
    A_full = (
        consts.X @ R @ consts.X.T
        + hyper.gamma * consts.X @ L_joined @ consts.X.T
        + hyper.beta * np.eye(consts.X.shape[0])
    )
    ours = np.trace(P.T @ A_full @ P)
    w, U = linalg.eigh(B)
    keep = w > 1e-10
    for _ in range(500):
        Y = rng.standard_normal((keep.sum(), 3))
        Q = linalg.qr(Y, mode="economic")[0]
        Pf = U[:, keep] @ (Q / np.sqrt(w[keep])[:, None])
        assert ours <= np.trace(Pf.T @ A_full @ Pf) + 1e-9


def test_update_centroids_alpha_zero():
    src, tgt = small_instance(12)
    consts = assemble_constants(src, tgt)
    rng = np.random.default_rng(12)
    P = rng.standard_normal((consts.X.shape[0], 3))
    G_t = onehot(rng.integers(1, 4, consts.n_t), 3)
    F = update_centroids(P, consts.X, consts.n_s, consts.E, G_t, alpha=0.0)
    assert np.abs(F - P.T @ consts.X @ consts.E).max() < 1e-12


def test_update_centroids_large_alpha_kmeans_limit():
    src, tgt = small_instance(13, n_t=12)
    consts = assemble_constants(src, tgt)
    rng = np.random.default_rng(13)
    P = rng.standard_normal((consts.X.shape[0], 3))
    G_t = onehot(np.tile([1, 2, 3], 4), 3)
    F = update_centroids(P, consts.X, consts.n_s, consts.E, G_t, alpha=1e6)
    Zt = P.T @ consts.X[:, consts.n_s :]
    for c in range(3):
        members = Zt[:, G_t[:, c] > 0].mean(axis=1)
        assert np.abs(F[:, c] - members).max() < 1e-4


def test_update_centroids_zero_gradient():
    rng = np.random.default_rng(14)
    for trial in range(5):
        src, tgt = small_instance(300 + trial)
        consts = assemble_constants(src, tgt)
        alpha = rng.uniform(0.05, 3.0)
        P = rng.standard_normal((consts.X.shape[0], 3))
        G_t = onehot(rng.integers(1, 4, consts.n_t), 3)
        F = update_centroids(P, consts.X, consts.n_s, consts.E, G_t, alpha)
        PtX = P.T @ consts.X
        G = np.vstack([np.zeros((consts.n_s, 3)), G_t])

        def cost(Fm):
            return ((PtX @ consts.E - Fm) ** 2).sum() + alpha * (
                (PtX @ np.diag(consts.v_diag) - Fm @ G.T) ** 2
            ).sum()

        h = 1e-6
        for i in range(F.shape[0]):
            for j in range(F.shape[1]):
                Fp, Fm_ = F.copy(), F.copy()
                Fp[i, j] += h
                Fm_[i, j] -= h
                grad = (cost(Fp) - cost(Fm_)) / (2 * h)
                assert abs(grad) < 1e-6 * max(1.0, abs(cost(F)))


def test_assign_clusters_trivial():
    P = np.eye(2)
    X_t = np.array([[1.0], [1.0]])
    F = np.array([[0.0, 10.0], [0.0, 10.0]])
    G = assign_clusters(P, X_t, F)
    assert G[0, 0] == 1.0


def test_assign_clusters_tie_lower_index():
    P = np.eye(1)
    X_t = np.array([[0.0]])
    F = np.array([[1.0, -1.0]])
    G = assign_clusters(P, X_t, F)
    assert G[0, 0] == 1.0


def test_assign_clusters_matches_exhaustive_scan():
    rng = np.random.default_rng(15)
    P = rng.standard_normal((6, 3))
    X_t = rng.standard_normal((6, 20))
    F = rng.standard_normal((3, 4))
    G = assign_clusters(P, X_t, F)
    Z = P.T @ X_t
    for i in range(20):
        dists = [((Z[:, i] - F[:, c]) ** 2).sum() for c in range(4)]
        assert G[i, int(np.argmin(dists))] == 1.0
        assert G[i].sum() == 1.0


def test_objective_zeros_and_beta_homogeneity():
    from cmms.solver import _objective_terms

    m, n_s, n_t, C = 4, 5, 4, 2
    X = np.zeros((m, n_s + n_t))
    E = np.zeros((n_s + n_t, C))
    G_t = onehot(np.ones(n_t, dtype=np.int64), C)
    L_s = np.zeros((n_s, n_s))
    hyper = Hyperparams(alpha=0.7, beta=0.3, gamma=2.0, d=2, k=2)
    zero = _objective_terms(
        X, n_s, E, np.zeros((m, 2)), np.zeros((2, C)), G_t, L_s, None,
        np.zeros((n_t, n_t)), 0.5, hyper, hyper.gamma, True,
    )
    assert zero == 0.0
    P = np.random.default_rng(16).standard_normal((m, 2))
    one = _objective_terms(X, n_s, E, P, np.zeros((2, C)), G_t, L_s, None, None,
                           0.0, hyper, hyper.gamma, False)
    two = _objective_terms(X, n_s, E, 2 * P, np.zeros((2, C)), G_t, L_s, None, None,
                           0.0, hyper, hyper.gamma, False)
    assert abs(two - 4 * one) < 1e-12 * max(1.0, abs(one))


def test_objective_matches_naive_loop_oracle():
    from cmms.graphs import laplacian_from_similarity
    from cmms.solver import _objective_terms

    rng = np.random.default_rng(17)
    src, tgt = small_instance(17, n_s=10, n_t=8, m=4)
    consts = assemble_constants(src, tgt)
    hyper = Hyperparams(alpha=0.4, beta=0.6, gamma=1.2, d=2, k=3)
    P = rng.standard_normal((4, 2))
    F = rng.standard_normal((2, 3))
    G_t = onehot(rng.integers(1, 4, consts.n_t), 3)
    A_d = pairwise_sq_dists(tgt.features)
    delta = estimate_delta(A_d, 3)
    S = update_similarity(A_d, 3, delta)
    L_t = laplacian_from_similarity(S)
    got = _objective_terms(
        consts.X, consts.n_s, consts.E, P, F, G_t,
        consts.source_laplacian.matrix, L_t, S, delta, hyper, hyper.gamma, True,
    )
    # naive term-by-term re-evaluation
    Z = P.T @ consts.X
    match = sum(
        (Z[:, : consts.n_s] @ consts.E_s[:, c] - F[:, c]) @ (Z[:, : consts.n_s] @ consts.E_s[:, c] - F[:, c])
        for c in range(3)
    )
    cluster = 0.0
    for i in range(consts.n_t):
        c = int(np.argmax(G_t[i]))
        diff = Z[:, consts.n_s + i] - F[:, c]
        cluster += diff @ diff
    reg = (P**2).sum()
    Zs = Z[:, : consts.n_s]
    Ls = consts.source_laplacian.matrix
    manifold_s = 2 * sum(
        Zs[r] @ Ls @ Zs[r] for r in range(2)
    )
    Zt = Z[:, consts.n_s :]
    manifold_t = 2 * sum(Zt[r] @ L_t @ Zt[r] for r in range(2))
    s_norm = delta * (S**2).sum()
    expect = match + hyper.alpha * cluster + hyper.beta * reg + hyper.gamma * (
        manifold_s + manifold_t + s_norm
    )
    assert abs(got - expect) < 1e-10 * max(1.0, abs(expect))


def test_fit_defaults_follow_protocol():
    h = Hyperparams()
    assert h.d == 100 and h.gamma == 5.0 and h.k == 10 and h.max_iter == 10


def test_fit_uda_zero_shift_sanity():
    rng = np.random.default_rng(18)
    X = np.vstack(
        [rng.standard_normal((15, 8)) + 6 * np.eye(8)[c % 8] * 3 for c in range(3)]
    )
    y = np.repeat([1, 2, 3], 15)
    src = Dataset(X, y)
    tgt = Dataset(X.copy(), y.copy())
    hyper = Hyperparams(d=4, k=5, max_iter=5, alpha=0.1, beta=0.1)
    state, pred = fit_uda(src, tgt, hyper)
    assert np.array_equal(pred, y)


def test_fit_uda_constraint_preserved():
    src, tgt = gaussian_shift_task(11, shift=2.6)
    hyper = Hyperparams(d=5, k=10, max_iter=4, alpha=0.1, beta=0.1)
    state, _ = fit_uda(src, tgt, hyper)
    consts = assemble_constants(src, tgt)
    B = centering_gram(consts.X)
    gram = state.P.T @ B @ state.P
    d_eff = state.P.shape[1]
    assert np.abs(gram - np.eye(d_eff)).max() < 1e-6 * max(1, d_eff)


def test_fit_uda_permutation_equivariance():
    src, tgt = gaussian_shift_task(19, shift=2.0, n_per_class_target=20)
    hyper = Hyperparams(d=4, k=6, max_iter=4, alpha=0.1, beta=0.1)
    _, pred = fit_uda(src, tgt, hyper)
    rng = np.random.default_rng(19)
    perm = rng.permutation(tgt.n_samples)
    tgt_p = Dataset(tgt.features[perm], tgt.labels[perm], tgt.name)
    _, pred_p = fit_uda(src, tgt_p, hyper)
    assert np.array_equal(pred_p, pred[perm])


def test_fit_uda_class_centroid_identity():
    src, tgt = gaussian_shift_task(20, shift=2.0, n_per_class_target=20)
    hyper = Hyperparams(d=4, k=6, max_iter=3, alpha=0.1, beta=0.1)
    state, _ = fit_uda(src, tgt, hyper)
    consts = assemble_constants(src, tgt)
    PtXE = state.P.T @ consts.X @ consts.E
    Zs = state.P.T @ consts.X[:, : consts.n_s]
    for c in range(1, 4):
        mean = Zs[:, consts.labels_src == c].mean(axis=1)
        assert np.abs(PtXE[:, c - 1] - mean).max() < 1e-10


def test_variant_cm_equals_full_at_gamma_zero():
    src, tgt = gaussian_shift_task(21, shift=2.0, n_per_class_target=25)
    base = Hyperparams(d=4, k=6, max_iter=5, alpha=0.1, beta=0.1)
    state_full, pred_full = fit_uda(src, tgt, base.replace(gamma=0.0, variant="full"))
    state_cm, pred_cm = fit_uda(src, tgt, base.replace(gamma=5.0, variant="cm"))
    assert np.array_equal(pred_full, pred_cm)
    assert state_full.objective_trace == state_cm.objective_trace
    assert np.array_equal(state_full.P, state_cm.P)


@pytest.mark.parametrize("variant", ["full", "cm", "rm", "pa", "ds", "op"])
def test_all_variants_run_and_are_monotone_enough(variant):
    src, tgt = gaussian_shift_task(22, shift=2.0, n_per_class_target=25)
    hyper = Hyperparams(d=4, k=6, max_iter=6, alpha=0.1, beta=0.1, variant=variant)
    state, pred = fit_uda(src, tgt, hyper)
    assert len(pred) == tgt.n_samples
    trace = np.asarray(state.objective_trace)
    if variant != "ds":  # ds re-couples the Laplacian to the labels each round
        assert (np.diff(trace) <= 1e-9 * np.abs(trace[:-1])).all()


def test_fit_uda_empty_cluster_logged():
    # squeeze all target points near one source class so some cluster empties
    rng = np.random.default_rng(23)
    Xs = np.vstack([rng.standard_normal((10, 6)) + c * 8 for c in range(3)])
    ys = np.repeat([1, 2, 3], 10)
    Xt = rng.standard_normal((12, 6))
    hyper = Hyperparams(d=2, k=4, max_iter=3, alpha=0.5, beta=0.1)
    state, _ = fit_uda(Dataset(Xs, ys), Dataset(Xt), hyper)
    counts = state.G_t.sum(axis=0)
    if (counts == 0).any():
        assert state.empty_clusters


def test_projection_lhs_matches_quadratic_op_route():
    # the loop assembles X R X^T in factored form; it must equal the explicit
    # n x n quadratic route op-for-op
    from cmms.graphs import laplacian_from_similarity
    from cmms.solver import _projection_lhs

    rng = np.random.default_rng(24)
    src, tgt = small_instance(24, n_s=14, n_t=11, m=7)
    consts = assemble_constants(src, tgt)
    hyper = Hyperparams(alpha=0.35, beta=0.25, gamma=1.7, d=3, k=3)
    G_t = onehot(rng.integers(1, 4, consts.n_t), 3)
    A_d = pairwise_sq_dists(tgt.features)
    S = update_similarity(A_d, 3, estimate_delta(A_d, 3))
    L_t = laplacian_from_similarity(S)
    L_src_term = 2.0 * (
        consts.X[:, : consts.n_s]
        @ consts.source_laplacian.matrix
        @ consts.X[:, : consts.n_s].T
    )
    fast = _projection_lhs(
        consts.X, consts.n_s, consts.E, G_t, L_src_term, L_t, hyper, hyper.gamma
    )
    G = np.vstack([np.zeros((consts.n_s, 3)), G_t])
    R = matching_quadratic(consts.E, consts.v_diag, G, hyper.alpha)
    L_joined = np.zeros((consts.n, consts.n))
    L_joined[: consts.n_s, : consts.n_s] = 2 * consts.source_laplacian.matrix
    L_joined[consts.n_s :, consts.n_s :] = 2 * L_t
    slow = (
        consts.X @ R @ consts.X.T
        + hyper.gamma * (consts.X @ L_joined @ consts.X.T)
        + hyper.beta * np.eye(consts.X.shape[0])
    )
    assert np.abs(fast - slow).max() < 1e-9 * max(1.0, np.abs(slow).max())


def test_rescale_delta_option_runs_and_stays_valid():
    src, tgt = gaussian_shift_task(25, shift=2.0, n_per_class_target=20)
    hyper = Hyperparams(
        d=4, k=5, max_iter=4, alpha=0.1, beta=0.1, rescale_delta_each_iter=True
    )
    state, pred = fit_uda(src, tgt, hyper)
    S = state.graph.S
    assert np.abs(S.sum(axis=1) - 1.0).max() < 1e-10
    assert state.graph.delta >= 0.0
    assert len(pred) == tgt.n_samples
