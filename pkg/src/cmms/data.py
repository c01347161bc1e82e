"""Feature-file loading, validation, standardization, PCA reduction and splits.

File formats (shared with the converter tool):
  * CSV features: one sample per line, comma-separated decimal floats, no header.
  * Labels: one integer per line, aligned with feature rows.
  * Binary: magic ``CMMS``, u32 version = 1, u64 n, u64 m, then n*m
    little-endian float64 values in row-major order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DataError

BIN_MAGIC = b"CMMS"
BIN_VERSION = 1
_BIN_HEADER = struct.Struct("<4sIQQ")

ZSCORE_EPS = 1e-12


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive (determinism)."""
    flip = np.sign(basis[np.argmax(np.abs(basis), axis=0), np.arange(basis.shape[1])])
    flip[flip == 0] = 1.0
    return basis * flip


@dataclass
class Dataset:
    """A dense feature matrix (rows = samples) with optional integer labels.

    Arbitrary integer class values are accepted; solver entry points densify
    them to 1..C internally and reports keep the original values.
    """

    features: np.ndarray
    labels: np.ndarray | None = None
    name: str = ""

    def __post_init__(self) -> None:
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        if self.features.size == 0:
            raise DataError(f"dataset '{self.name}': no rows")
        bad = ~np.isfinite(self.features)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise DataError(f"dataset '{self.name}': non-finite value at row {r + 1}, col {c + 1}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if not np.issubdtype(self.labels.dtype, np.integer):
                as_int = self.labels.astype(np.int64)
                if not np.array_equal(as_int, self.labels):
                    raise DataError(f"dataset '{self.name}': labels must be integers")
                self.labels = as_int
            if self.labels.shape != (self.n_samples,):
                raise DataError(
                    f"dataset '{self.name}': {self.labels.shape[0]} labels for "
                    f"{self.n_samples} samples"
                )

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_dims(self) -> int:
        return self.features.shape[1]

    @property
    def class_values(self) -> np.ndarray:
        if self.labels is None:
            raise DataError(f"dataset '{self.name}' has no labels")
        return np.unique(self.labels)

    @property
    def n_classes(self) -> int:
        return len(self.class_values)

    def with_labels(self, labels: np.ndarray) -> "Dataset":
        return Dataset(self.features, labels, self.name)


@dataclass
class SdaSplit:
    """Partition of a labeled target domain into labeled/unlabeled parts.

    `labeled` is None for the degenerate all-unlabeled split (the
    semi-supervised fit then reduces to the unsupervised one).
    """

    labeled: Dataset | None
    unlabeled: Dataset
    per_class_count: int
    labeled_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    unlabeled_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))


def _parse_csv(path: str, name: str) -> np.ndarray:
    rows: list[np.ndarray] = []
    n_cols = -1
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if n_cols == -1:
                n_cols = len(parts)
            elif len(parts) != n_cols:
                raise DataError(
                    f"{path}: row {i + 1} has {len(parts)} columns, expected {n_cols}"
                )
            try:
                row = np.asarray(parts, dtype=np.float64)
            except ValueError:
                for j, tok in enumerate(parts):
                    try:
                        float(tok)
                    except ValueError:
                        raise DataError(
                            f"{path}: row {i + 1}, col {j + 1}: cannot parse {tok!r}"
                        ) from None
                raise
            bad = ~np.isfinite(row)
            if bad.any():
                j = int(np.argmax(bad))
                raise DataError(f"{path}: non-finite value at row {i + 1}, col {j + 1}")
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: no rows")
    return np.vstack(rows)


def _parse_bin(path: str, name: str) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_BIN_HEADER.size)
        if len(header) < _BIN_HEADER.size:
            raise DataError(f"{path}: truncated header ({len(header)} bytes)")
        magic, version, n, m = _BIN_HEADER.unpack(header)
        if magic != BIN_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {BIN_MAGIC!r}")
        if version != BIN_VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        if n == 0 or m == 0:
            raise DataError(f"{path}: no rows")
        payload = fh.read()
    expected = n * m * 8
    if len(payload) != expected:
        raise DataError(
            f"{path}: payload is {len(payload)} bytes, header (n={n}, m={m}) "
            f"requires {expected}"
        )
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        flat = int(np.argmax(bad))
        raise DataError(
            f"{path}: non-finite value at row {flat // m + 1}, col {flat % m + 1}"
        )
    return values.reshape(int(n), int(m))


def load_features(path: str, fmt: str = "csv", name: str = "") -> Dataset:
    """Load a feature matrix from a CSV or binary file."""
    if fmt == "csv":
        features = _parse_csv(path, name)
    elif fmt == "bin":
        features = _parse_bin(path, name)
    else:
        raise DataError(f"unknown format {fmt!r} (expected 'csv' or 'bin')")
    return Dataset(features, name=name or path)


def save_features(dataset: Dataset, path: str, fmt: str = "csv") -> None:
    """Write features in one of the two interchange formats (bit-exact for bin)."""
    X = dataset.features
    if fmt == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            for row in X:
                fh.write(",".join(repr(float(v)) for v in row))
                fh.write("\n")
    elif fmt == "bin":
        n, m = X.shape
        with open(path, "wb") as fh:
            fh.write(_BIN_HEADER.pack(BIN_MAGIC, BIN_VERSION, n, m))
            fh.write(np.ascontiguousarray(X, dtype="<f8").tobytes())
    else:
        raise DataError(f"unknown format {fmt!r} (expected 'csv' or 'bin')")


def load_labels(path: str) -> np.ndarray:
    """Load an aligned one-integer-per-line label file."""
    labels: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                labels.append(int(line))
            except ValueError:
                raise DataError(f"{path}: row {i + 1}: cannot parse label {line!r}") from None
    if not labels:
        raise DataError(f"{path}: no rows")
    return np.asarray(labels, dtype=np.int64)


def save_labels(labels: np.ndarray, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in np.asarray(labels).ravel():
            fh.write(f"{int(v)}\n")


def zscore(dataset: Dataset) -> Dataset:
    """Standardize each column to mean 0, population std 1.

    Columns with std <= 1e-12 are set to all-zero. Statistics are computed on
    this dataset alone (per-domain standardization).
    """
    if dataset.n_samples < 2:
        raise DataError("zscore needs at least 2 samples")
    X = dataset.features
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    degenerate = sd <= ZSCORE_EPS
    out = (X - mu) / np.where(degenerate, 1.0, sd)
    out[:, degenerate] = 0.0
    return Dataset(out, dataset.labels, dataset.name)


def pca(dataset: Dataset, out_dim: int) -> tuple[Dataset, np.ndarray]:
    """Project onto the top principal components of the mean-centered data.

    Returns the reduced dataset and the orthonormal basis (m x out_dim).
    Retained variance uses the population (1/n) convention.
    """
    n, m = dataset.features.shape
    limit = min(n - 1, m)
    if not 1 <= out_dim <= limit:
        raise DataError(f"pca out_dim {out_dim} out of range [1, {limit}]")
    centered = dataset.features - dataset.features.mean(axis=0)
    _, _, vt = linalg.svd(centered, full_matrices=False)
    basis = _fix_signs(vt[:out_dim].T)
    reduced = centered @ basis
    return Dataset(reduced, dataset.labels, dataset.name), basis


def split_sda(dataset: Dataset, per_class: int, seed: int) -> SdaSplit:
    """Select `per_class` labeled samples of each class; the rest are unlabeled.

    Deterministic given the seed. Every class must have more than `per_class`
    samples so the unlabeled part covers all classes.
    """
    if dataset.labels is None:
        raise DataError("split_sda needs labels")
    if per_class < 1:
        raise DataError(f"per_class must be >= 1, got {per_class}")
    rng = np.random.default_rng(seed)
    labeled_idx: list[np.ndarray] = []
    for value in dataset.class_values:
        members = np.flatnonzero(dataset.labels == value)
        if len(members) <= per_class:
            raise DataError(
                f"class {value} has {len(members)} samples, needs more than {per_class}"
            )
        chosen = rng.choice(members, size=per_class, replace=False)
        labeled_idx.append(np.sort(chosen))
    labeled_indices = np.concatenate(labeled_idx)
    mask = np.zeros(dataset.n_samples, dtype=bool)
    mask[labeled_indices] = True
    unlabeled_indices = np.flatnonzero(~mask)
    labeled = Dataset(
        dataset.features[labeled_indices],
        dataset.labels[labeled_indices],
        f"{dataset.name}/labeled",
    )
    unlabeled = Dataset(
        dataset.features[unlabeled_indices],
        dataset.labels[unlabeled_indices],
        f"{dataset.name}/unlabeled",
    )
    return SdaSplit(labeled, unlabeled, per_class, labeled_indices, unlabeled_indices)


def subsample_per_class(dataset: Dataset, per_class: int, seed: int) -> Dataset:
    """Keep `per_class` samples of each class (source-side benchmark protocols)."""
    if dataset.labels is None:
        raise DataError("subsample_per_class needs labels")
    rng = np.random.default_rng(seed)
    keep: list[np.ndarray] = []
    for value in dataset.class_values:
        members = np.flatnonzero(dataset.labels == value)
        if len(members) < per_class:
            raise DataError(
                f"class {value} has {len(members)} samples, needs at least {per_class}"
            )
        keep.append(np.sort(rng.choice(members, size=per_class, replace=False)))
    idx = np.concatenate(keep)
    return Dataset(dataset.features[idx], dataset.labels[idx], dataset.name)
