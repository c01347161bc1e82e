"""Domain adaptation by class-centroid matching with adaptive local-manifold
self-learning, in unsupervised and semi-supervised (homogeneous and
heterogeneous) modes, plus a benchmark harness on portable feature files."""

from .data import Dataset, SdaSplit, load_features, load_labels, pca, split_sda, zscore
from .errors import DataError, NumericsError
from .evaluation import Report, accuracy, per_class_accuracy, run_ablation
from .graphs import (
    SourceLaplacian,
    TargetGraph,
    estimate_delta,
    laplacian_from_similarity,
    pairwise_sq_dists,
    source_laplacian,
    update_similarity,
)
from .numerics import EigResult, gen_eig_smallest, sym_eig
from .semi import SemiState, fit_sda_heterogeneous, fit_sda_homogeneous
from .solver import (
    ConstantMatrices,
    Hyperparams,
    ModelState,
    assemble_constants,
    fit_uda,
    init_labels,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "SdaSplit",
    "load_features",
    "load_labels",
    "pca",
    "split_sda",
    "zscore",
    "DataError",
    "NumericsError",
    "Report",
    "accuracy",
    "per_class_accuracy",
    "run_ablation",
    "SourceLaplacian",
    "TargetGraph",
    "estimate_delta",
    "laplacian_from_similarity",
    "pairwise_sq_dists",
    "source_laplacian",
    "update_similarity",
    "EigResult",
    "gen_eig_smallest",
    "sym_eig",
    "SemiState",
    "fit_sda_heterogeneous",
    "fit_sda_homogeneous",
    "ConstantMatrices",
    "Hyperparams",
    "ModelState",
    "assemble_constants",
    "fit_uda",
    "init_labels",
    "__version__",
]
