"""Kernel-guided graph embedding, efficiency-score prediction and bootstrap search over cell DAGs."""

from .graph import (
    CONV1X1,
    DWSEP3X3,
    CellSpec,
    Dag,
    DegenerateCellError,
    OpKind,
    RandomDagSampler,
    flatten_upper_triangle,
    labeled,
    mac_estimate,
    prune_to_cell,
    random_dag,
)
from .wl_kernel import WlConfig, wl_canonical_hash, wl_similarity
from .nn import Mlp, TrainConfig
from .encoder import AdjacencyEmbedder, EncoderBundle, cosine_similarity, embed, train_encoder
from .oracle import (
    BenchmarkTable,
    Evaluation,
    MissingArchitectureError,
    SyntheticOracle,
    SyntheticOracleConfig,
    TabularOracle,
    efficiency_score,
)
from .predictor import Predictor, build_estimator, fit_predictor, predict
from .search import SearchResult, bootstrap_optimize, exhaustive_oracle_search, global_prediction_bias
from .metrics import kendall_tau, pca_project, pearson

__version__ = "0.1.0"

__all__ = [
    "CONV1X1",
    "DWSEP3X3",
    "CellSpec",
    "Dag",
    "DegenerateCellError",
    "OpKind",
    "RandomDagSampler",
    "flatten_upper_triangle",
    "labeled",
    "mac_estimate",
    "prune_to_cell",
    "random_dag",
    "WlConfig",
    "wl_canonical_hash",
    "wl_similarity",
    "Mlp",
    "TrainConfig",
    "AdjacencyEmbedder",
    "EncoderBundle",
    "cosine_similarity",
    "embed",
    "train_encoder",
    "BenchmarkTable",
    "Evaluation",
    "MissingArchitectureError",
    "SyntheticOracle",
    "SyntheticOracleConfig",
    "TabularOracle",
    "efficiency_score",
    "Predictor",
    "build_estimator",
    "fit_predictor",
    "predict",
    "SearchResult",
    "bootstrap_optimize",
    "exhaustive_oracle_search",
    "global_prediction_bias",
    "kendall_tau",
    "pca_project",
    "pearson",
]
