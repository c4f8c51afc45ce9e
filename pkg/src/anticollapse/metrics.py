"""Retrieval and clustering metrics for labeled embeddings.

Rankings use cosine similarity with the query itself excluded; ties are
broken by lower row index so results are identical across platforms and
evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .containers import EmbeddingBatch, ProxySet
from .errors import DegenerateInput, EmptyInput, KTooLarge, LengthMismatch
from .linalg import seeded_rng
from .losses import cosine_similarity_matrix
from .validation import check_matrix


@dataclass(frozen=True)
class EvalReport:
    """Retrieval/clustering metrics at one evaluation point.

    ``density`` is ``None`` when the input has no intra-class or no
    inter-class pair to compare.
    """

    recall_at: dict[int, float]
    nmi: float
    f1: float
    map_at: dict[int, float]
    density: float | None


def _ranked_neighbors(features: np.ndarray) -> np.ndarray:
    """Per-row neighbor ordering by descending cosine similarity, self excluded.

    Stable sort on the negated similarities gives deterministic tie-breaking
    by lower row index.
    """
    sims = features @ features.T
    np.fill_diagonal(sims, -np.inf)
    return np.argsort(-sims, axis=1, kind="stable")[:, :-1]


def recall_at_k(batch: EmbeddingBatch, ks) -> dict[int, float]:
    """Percentage of queries whose top-K cosine neighbors contain a same-class row."""
    n = batch.n
    if n < 2:
        raise EmptyInput("recall_at_k needs at least two rows")
    ks = [int(k) for k in ks]
    for k in ks:
        if k < 1 or k >= n:
            raise KTooLarge(f"K={k} must satisfy 1 <= K < n={n}")
    order = _ranked_neighbors(batch.features)
    same = batch.labels[order] == batch.labels[:, None]
    return {k: 100.0 * int(same[:, :k].any(axis=1).sum()) / n for k in ks}


def kmeans_cluster(x, k: int, seed) -> np.ndarray:
    """Lloyd's k-means from seeded k-means++ starts; deterministic per seed.

    Stops at an assignment fixpoint or after 300 iterations. Empty clusters
    keep their previous center.
    """
    x = check_matrix(x, "X")
    n = x.shape[0]
    if k > n:
        raise KTooLarge(f"k={k} exceeds number of rows {n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = seeded_rng(seed)

    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)  # all remaining points coincide with a center
        centers[j] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))

    assign = np.full(n, -1)
    for _ in range(300):
        dists = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = np.argmin(dists, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            members = x[assign == j]
            if members.shape[0]:
                centers[j] = members.mean(axis=0)
    return assign.astype(np.int64)


def _partition_entropy(counts: np.ndarray, n: int) -> float:
    p = counts / n
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth) -> float:
    """Normalized mutual information with arithmetic-mean entropy normalization.

    Natural-log entropies (the ratio is base-invariant); defined as 1.0 when
    both partitions are a single cluster.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise LengthMismatch(f"pred {pred.shape} and truth {truth.shape} must be equal-length 1-D")
    n = pred.size
    if n == 0:
        raise EmptyInput("nmi needs at least one point")

    _, pred_idx = np.unique(pred, return_inverse=True)
    _, truth_idx = np.unique(truth, return_inverse=True)
    contingency = np.zeros((pred_idx.max() + 1, truth_idx.max() + 1))
    np.add.at(contingency, (pred_idx, truth_idx), 1.0)

    h_pred = _partition_entropy(contingency.sum(axis=1), n)
    h_truth = _partition_entropy(contingency.sum(axis=0), n)
    joint = contingency[contingency > 0]
    h_joint = _partition_entropy(joint, n)
    if h_pred + h_truth == 0.0:
        return 1.0
    mutual = max(0.0, h_pred + h_truth - h_joint)
    return mutual / ((h_pred + h_truth) / 2.0)


def f1_clustering(pred, truth) -> float:
    """Pairwise F1: precision/recall over same-cluster pairs vs same-class pairs."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise LengthMismatch(f"pred {pred.shape} and truth {truth.shape} must be equal-length 1-D")

    def pairs(counts: np.ndarray) -> int:
        c = counts.astype(np.int64)
        return int(np.sum(c * (c - 1) // 2))

    _, pred_idx = np.unique(pred, return_inverse=True)
    _, truth_idx = np.unique(truth, return_inverse=True)
    contingency = np.zeros((pred_idx.max() + 1, truth_idx.max() + 1), dtype=np.int64)
    np.add.at(contingency, (pred_idx, truth_idx), 1)

    true_pos = pairs(contingency.ravel())
    pred_pos = pairs(contingency.sum(axis=1))
    actual_pos = pairs(contingency.sum(axis=0))
    precision = true_pos / pred_pos if pred_pos else 0.0
    recall = true_pos / actual_pos if actual_pos else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def mean_average_precision(batch: EmbeddingBatch, cutoff: int) -> float:
    """Mean over queries of average precision on the ranked list cut at ``cutoff``.

    AP is normalized by min(cutoff, number of relevant rows); queries with no
    relevant row contribute 0.
    """
    n = batch.n
    if n < 2:
        raise EmptyInput("mean_average_precision needs at least two rows")
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1")
    order = _ranked_neighbors(batch.features)
    same = batch.labels[order] == batch.labels[:, None]
    ap_sum = 0.0
    for i in range(n):
        num_relevant = int(same[i].sum())
        if num_relevant == 0:
            continue
        rel = same[i, :cutoff]
        hits = np.cumsum(rel)
        ranks = np.arange(1, rel.size + 1)
        precision_at_hits = hits[rel] / ranks[rel]
        ap_sum += float(precision_at_hits.sum()) / min(cutoff, num_relevant)
    return ap_sum / n


def _density_raw(features: np.ndarray, labels: np.ndarray) -> float:
    same = labels[:, None] == labels[None, :]
    upper = np.triu(np.ones_like(same, dtype=bool), k=1)
    intra = same & upper
    inter = ~same & upper
    if not intra.any() or not inter.any():
        raise DegenerateInput("need at least one intra-class and one inter-class pair")
    diff = features[:, None, :] - features[None, :, :]
    dists = np.sqrt((diff**2).sum(axis=2))
    inter_mean = float(dists[inter].mean())
    if inter_mean == 0.0:
        raise DegenerateInput("inter-class mean distance is zero")
    return float(dists[intra].mean()) / inter_mean


def embedding_density(batch: EmbeddingBatch) -> float:
    """Mean intra-class pairwise distance over mean inter-class pairwise distance."""
    return _density_raw(batch.features, batch.labels)


def proxy_similarity_heat(proxies: ProxySet) -> np.ndarray:
    """Proxy-by-proxy cosine similarity matrix with an exact unit diagonal."""
    sims = cosine_similarity_matrix(proxies.proxies, proxies.proxies)
    np.fill_diagonal(sims, 1.0)
    return sims


def evaluate(
    batch: EmbeddingBatch,
    ks=(1, 2, 4, 8),
    map_cutoff: int = 1000,
    seed=0,
) -> EvalReport:
    """Full evaluation bundle: Recall@K, NMI/F1 over seeded k-means, mAP, density.

    Clustering uses k equal to the number of ground-truth classes.
    """
    ks = [k for k in ks if k < batch.n]
    clusters = kmeans_cluster(batch.features, batch.num_classes(), seed)
    try:
        density = embedding_density(batch)
    except DegenerateInput:
        density = None
    return EvalReport(
        recall_at=recall_at_k(batch, ks),
        nmi=nmi(clusters, batch.labels),
        f1=f1_clustering(clusters, batch.labels),
        map_at={int(map_cutoff): mean_average_precision(batch, map_cutoff)},
        density=density,
    )
