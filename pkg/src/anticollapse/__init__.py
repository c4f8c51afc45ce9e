"""Coding-rate anti-collapse losses, metrics and trainers for unit-sphere embeddings."""

__version__ = "0.1.0"

from .containers import EmbeddingBatch, LossResult, ProxySet
from .data import (
    BatchPlan,
    MixtureConfig,
    batch_sampler,
    generate_mixture,
    load_embeddings,
    save_embeddings,
    split_classes,
)
from .estimator import AntiCollapseEmbedding
from .linalg import gram_features, gram_samples, logdet_psd, seeded_rng, solve_psd, sym_eigvals
from .losses import (
    AntiCollapseConfig,
    ProxyAnchorParams,
    cosine_similarity_matrix,
    pair_anticollapse,
    proxy_anchor,
    proxy_anticollapse,
    proxy_nca,
    proxy_rate,
)
from .metrics import (
    EvalReport,
    embedding_density,
    evaluate,
    f1_clustering,
    kmeans_cluster,
    mean_average_precision,
    nmi,
    proxy_similarity_heat,
    recall_at_k,
)
from .rates import (
    RateParams,
    RateReport,
    coding_rate,
    coding_rate_grad,
    intra_class_rate,
    rate_report,
    total_coding_length,
)
from .training import (
    TrainConfig,
    TrainState,
    TrainTrace,
    init_proxies,
    orthogonalize_proxies_demo,
    train,
    train_step,
)

__all__ = [
    "AntiCollapseConfig",
    "AntiCollapseEmbedding",
    "BatchPlan",
    "EmbeddingBatch",
    "EvalReport",
    "LossResult",
    "MixtureConfig",
    "ProxyAnchorParams",
    "ProxySet",
    "RateParams",
    "RateReport",
    "TrainConfig",
    "TrainState",
    "TrainTrace",
    "batch_sampler",
    "coding_rate",
    "coding_rate_grad",
    "cosine_similarity_matrix",
    "embedding_density",
    "evaluate",
    "f1_clustering",
    "generate_mixture",
    "gram_features",
    "gram_samples",
    "init_proxies",
    "intra_class_rate",
    "kmeans_cluster",
    "load_embeddings",
    "logdet_psd",
    "mean_average_precision",
    "nmi",
    "orthogonalize_proxies_demo",
    "pair_anticollapse",
    "proxy_anchor",
    "proxy_anticollapse",
    "proxy_nca",
    "proxy_rate",
    "proxy_similarity_heat",
    "rate_report",
    "recall_at_k",
    "save_embeddings",
    "seeded_rng",
    "solve_psd",
    "split_classes",
    "sym_eigvals",
    "total_coding_length",
    "train",
    "train_step",
]
