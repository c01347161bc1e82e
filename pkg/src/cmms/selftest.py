"""Built-in invariant suite on synthetic data: a fast desk-scale gate that
exercises the solver contracts without external files."""

from __future__ import annotations

import warnings

import numpy as np

from . import graphs
from .data import SdaSplit, split_sda
from .evaluation import accuracy
from .numerics import gen_eig_smallest
from .semi import fit_sda_homogeneous
from .solver import Hyperparams, fit_uda, init_labels
from .synth import gaussian_shift_task, random_uda_instance


def _check_similarity_rows() -> str | None:
    rng = np.random.default_rng(0)
    for trial in range(20):
        A = graphs.pairwise_sq_dists(rng.standard_normal((15, 4)))
        k = int(rng.integers(2, 7))
        delta = graphs.estimate_delta(A, k)
        S = graphs.update_similarity(A, k, delta)
        if (S < -1e-15).any():
            return "negative similarity entry"
        if np.abs(S.sum(axis=1) - 1).max() > 1e-10:
            return "row sums differ from 1"
        if ((S > 0).sum(axis=1) > k).any():
            return "support larger than k"
        if np.abs(np.diag(S)).max() > 0:
            return "nonzero diagonal"
    return None


def _check_monotone() -> str | None:
    hyper = Hyperparams(d=4, k=5, max_iter=6, alpha=0.2, beta=0.1)
    for seed in range(3):
        src, tgt = random_uda_instance(seed)
        state, _ = fit_uda(src, tgt, hyper)
        trace = np.asarray(state.objective_trace)
        if not (np.diff(trace) <= 1e-9 * np.abs(trace[:-1])).all():
            return f"objective increased on instance seed={seed}"
    return None


def _check_eigensolver() -> str | None:
    rng = np.random.default_rng(1)
    for trial in range(5):
        m = int(rng.integers(5, 10))
        Q = np.linalg.qr(rng.standard_normal((m, m)))[0]
        A = Q @ np.diag(rng.uniform(0.5, 3.0, m)) @ Q.T
        C = rng.standard_normal((m, max(2, m - 2)))
        B = C @ C.T
        d = 2
        res = gen_eig_smallest(A, B, d)
        for i in range(res.effective_d):
            p, pi = res.vectors[:, i], res.values[i]
            r = np.linalg.norm(A @ p - pi * B @ p)
            scale = (np.linalg.norm(A) + abs(pi) * np.linalg.norm(B)) * np.linalg.norm(p)
            if r > 1e-8 * scale:
                return f"residual {r:.2e} too large"
        gram = res.vectors.T @ B @ res.vectors
        if np.abs(gram - np.eye(res.effective_d)).max() > 1e-6:
            return "vectors not B-orthonormal"
    return None


def _check_end_to_end() -> str | None:
    src, tgt = gaussian_shift_task(11, shift=2.6)
    hyper = Hyperparams(d=5, k=10, max_iter=10, alpha=0.1, beta=0.1)
    G0 = init_labels(src, tgt)
    baseline = accuracy(src.class_values[np.argmax(G0, axis=1)], tgt.labels)
    _, pred = fit_uda(src, tgt, hyper)
    acc = accuracy(pred, tgt.labels)
    if acc < 95.0:
        return f"accuracy {acc:.2f}% below 95%"
    if acc <= baseline:
        return f"accuracy {acc:.2f}% not above baseline {baseline:.2f}%"
    return None


def _check_sda_reduction() -> str | None:
    src, tgt = gaussian_shift_task(4, shift=2.2, n_per_class_target=25)
    hyper = Hyperparams(d=4, k=6, max_iter=5, alpha=0.1, beta=0.1)
    _, pred_u = fit_uda(src, tgt, hyper)
    split = SdaSplit(labeled=None, unlabeled=tgt, per_class_count=0)
    _, pred_s = fit_sda_homogeneous(src, split, hyper, lambda_fixed=(1.0, 0.0))
    if not np.array_equal(pred_u, pred_s):
        return "SDA with no labels deviates from the unsupervised fit"
    return None


def _check_sda_fixed_labels() -> str | None:
    src, tgt = gaussian_shift_task(5, shift=2.4)
    split = split_sda(tgt, per_class=2, seed=0)
    hyper = Hyperparams(d=4, k=6, max_iter=5, alpha=0.2, beta=0.1)
    semi, _ = fit_sda_homogeneous(src, split, hyper)
    n_l = split.labeled.n_samples
    if not np.array_equal(semi.base.G_t[:n_l], semi.G_l):
        return "labeled target rows were reassigned"
    if not 0.0 <= semi.lambda1 <= 1.0:
        return f"lambda1 {semi.lambda1} outside [0, 1]"
    return None


CHECKS = [
    ("similarity rows (nonneg, sum 1, k-sparse)", _check_similarity_rows),
    ("objective monotone on random instances", _check_monotone),
    ("generalized eigensolver residuals", _check_eigensolver),
    ("synthetic end-to-end accuracy", _check_end_to_end),
    ("semi-supervised reduction to unsupervised", _check_sda_reduction),
    ("labeled rows pinned in semi-supervised fit", _check_sda_fixed_labels),
]


def run_selftest() -> int:
    failures = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for name, check in CHECKS:
            problem = check()
            if problem is None:
                print(f"[PASS] {name}")
            else:
                failures += 1
                print(f"[FAIL] {name}: {problem}")
    print(f"{len(CHECKS) - failures}/{len(CHECKS)} checks passed")
    return 0 if failures == 0 else 1
