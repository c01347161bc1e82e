"""Seeded synthetic adaptation tasks for tests, the selftest gate, and demos."""

from __future__ import annotations

import numpy as np

from .data import Dataset


def _orthogonal_embed(rng: np.random.Generator, latent_dim: int, ambient_dim: int) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.standard_normal((ambient_dim, latent_dim)))
    return Q[:, :latent_dim]


def _separated_means(
    rng: np.random.Generator, n_classes: int, latent_dim: int, min_gap: float
) -> np.ndarray:
    """Random class means rescaled so every pair is at least min_gap apart."""
    means = rng.standard_normal((n_classes, latent_dim)) * 4.0
    gap = min(
        np.linalg.norm(means[i] - means[j])
        for i in range(n_classes)
        for j in range(i + 1, n_classes)
    )
    if gap < min_gap:
        means *= min_gap / gap
    return means


def gaussian_shift_task(
    seed: int,
    n_per_class_source: int = 60,
    n_per_class_target: int = 60,
    n_classes: int = 3,
    latent_dim: int = 2,
    ambient_dim: int = 30,
    shift: float = 2.5,
    spread: float = 1.0,
) -> tuple[Dataset, Dataset]:
    """Gaussian classes in a low-dim latent space embedded into ambient_dim;
    the target copy is translated by a fixed offset of `shift * spread`
    along a direction inside the class-separating subspace."""
    rng = np.random.default_rng(seed)
    means = _separated_means(rng, n_classes, latent_dim, 6.0 * spread)
    embed = _orthogonal_embed(rng, latent_dim, ambient_dim)
    offset_latent = rng.standard_normal(latent_dim)
    offset_latent *= shift * spread / np.linalg.norm(offset_latent)

    def sample(n_per_class: int, offset: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rows, labels = [], []
        for c in range(n_classes):
            z = means[c] + offset + spread * rng.standard_normal((n_per_class, latent_dim))
            rows.append(z @ embed.T)
            labels.extend([c + 1] * n_per_class)
        X = np.vstack(rows) + 0.05 * spread * rng.standard_normal(
            (n_per_class * n_classes, ambient_dim)
        )
        return X, np.asarray(labels, dtype=np.int64)

    Xs, ys = sample(n_per_class_source, np.zeros(latent_dim))
    Xt, yt = sample(n_per_class_target, offset_latent)
    return Dataset(Xs, ys, "synth-source"), Dataset(Xt, yt, "synth-target")


def two_moons_shift_task(
    seed: int,
    n_per_moon: int = 80,
    ambient_dim: int = 12,
    shift: float = 0.35,
    noise: float = 0.08,
) -> tuple[Dataset, Dataset]:
    """Two interleaved half-circles embedded into ambient_dim; the target copy
    is translated, so only the manifold shape identifies the classes."""
    rng = np.random.default_rng(seed)
    embed = _orthogonal_embed(rng, 2, ambient_dim)
    offset = rng.standard_normal(2)
    offset *= shift / np.linalg.norm(offset)

    def moons(offset2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        t1 = rng.uniform(0, np.pi, n_per_moon)
        t2 = rng.uniform(0, np.pi, n_per_moon)
        upper = np.column_stack([np.cos(t1), np.sin(t1)])
        lower = np.column_stack([1 - np.cos(t2), 0.5 - np.sin(t2)])
        Z = np.vstack([upper, lower]) + noise * rng.standard_normal((2 * n_per_moon, 2))
        Z = Z + offset2
        labels = np.repeat([1, 2], n_per_moon)
        X = Z @ embed.T + 0.01 * rng.standard_normal((2 * n_per_moon, ambient_dim))
        return X, labels.astype(np.int64)

    Xs, ys = moons(np.zeros(2))
    Xt, yt = moons(offset)
    return Dataset(Xs, ys, "moons-source"), Dataset(Xt, yt, "moons-target")


def random_uda_instance(seed: int) -> tuple[Dataset, Dataset]:
    """Random labeled source and target with sizes drawn from the audit ranges
    (n_s, n_t in [30, 120], m in [10, 60], C in [2, 5])."""
    rng = np.random.default_rng(seed)
    n_s = int(rng.integers(30, 121))
    n_t = int(rng.integers(30, 121))
    m = int(rng.integers(10, 61))
    C = int(rng.integers(2, 6))
    means = rng.standard_normal((C, m)) * 2.0

    def domain(n: int, jitter: float) -> tuple[np.ndarray, np.ndarray]:
        labels = np.concatenate([np.arange(1, C + 1), rng.integers(1, C + 1, n - C)])
        rng.shuffle(labels)
        X = means[labels - 1] + rng.standard_normal((n, m)) + jitter
        return X, labels.astype(np.int64)

    Xs, ys = domain(n_s, 0.0)
    Xt, yt = domain(n_t, 0.5)
    return Dataset(Xs, ys, "rand-source"), Dataset(Xt, yt, "rand-target")


def heterogeneous_task(
    seed: int,
    n_per_class: int = 40,
    n_classes: int = 3,
    dim_source: int = 20,
    dim_target: int = 35,
) -> tuple[Dataset, Dataset]:
    """Shared latent classes viewed through two different random embeddings."""
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((n_classes, 2)) * 4.0
    embed_s = _orthogonal_embed(rng, 2, dim_source)
    embed_t = _orthogonal_embed(rng, 2, dim_target)

    def view(embed: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray]:
        rows, labels = [], []
        for c in range(n_classes):
            z = means[c] + rng.standard_normal((n_per_class, 2))
            rows.append(z @ embed.T)
            labels.extend([c + 1] * n_per_class)
        X = np.vstack(rows) + 0.05 * rng.standard_normal((n_per_class * n_classes, dim))
        return X, np.asarray(labels, dtype=np.int64)

    Xs, ys = view(embed_s, dim_source)
    Xt, yt = view(embed_t, dim_target)
    return Dataset(Xs, ys, "hetero-source"), Dataset(Xt, yt, "hetero-target")
