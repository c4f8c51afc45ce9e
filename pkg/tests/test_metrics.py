import numpy as np
import pytest

from anticollapse.containers import EmbeddingBatch, ProxySet
from anticollapse.errors import DegenerateInput, KTooLarge, LengthMismatch
from anticollapse.linalg import seeded_rng
from anticollapse.metrics import (
    embedding_density,
    evaluate,
    f1_clustering,
    kmeans_cluster,
    mean_average_precision,
    nmi,
    proxy_similarity_heat,
    recall_at_k,
)
from oracles import (
    density_bruteforce,
    f1_bruteforce,
    inertia,
    map_bruteforce,
    nmi_bruteforce,
    random_unit_rows,
    recall_at_k_bruteforce,
)


def seeded_batch(seed, n=20, d=6, num_classes=4):
    rng = seeded_rng(seed)
    labels = rng.integers(0, num_classes, size=n)
    return EmbeddingBatch(random_unit_rows(rng, n, d), labels)


# --- recall ------------------------------------------------------------------

def test_recall_identical_pairs():
    x = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    batch = EmbeddingBatch(x, [0, 0, 1, 1])
    assert recall_at_k(batch, [1]) == {1: 100.0}


def test_recall_singleton_classes():
    batch = EmbeddingBatch(np.eye(3), [0, 1, 2])
    assert recall_at_k(batch, [1]) == {1: 0.0}


def test_recall_matches_bruteforce():
    for seed in range(6):
        batch = seeded_batch(seed, n=50)
        got = recall_at_k(batch, [1, 3, 7])
        for k, value in got.items():
            assert value == recall_at_k_bruteforce(batch.features, batch.labels, k)


def test_recall_monotone_in_k():
    batch = seeded_batch(11, n=30)
    got = recall_at_k(batch, list(range(1, 29)))
    values = [got[k] for k in range(1, 29)]
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_recall_k_too_large():
    batch = seeded_batch(0, n=5)
    with pytest.raises(KTooLarge):
        recall_at_k(batch, [5])


# --- k-means -----------------------------------------------------------------

def test_kmeans_k_equals_n():
    rng = seeded_rng(1)
    x = random_unit_rows(rng, 8, 4)
    assign = kmeans_cluster(x, 8, seed=0)
    centers = np.array([x[assign == j].mean(axis=0) if np.any(assign == j) else np.zeros(4) for j in range(8)])
    assert inertia(x, centers, assign) < 1e-24
    assert np.unique(assign).size == 8


def test_kmeans_recovers_separated_duplicates():
    x = np.array([[1.0, 0.0]] * 4 + [[0.0, 1.0]] * 4)
    assign = kmeans_cluster(x, 2, seed=3)
    assert np.unique(assign[:4]).size == 1
    assert np.unique(assign[4:]).size == 1
    assert assign[0] != assign[4]


def test_kmeans_beats_random_assignment():
    rng = seeded_rng(5)
    centers_true = np.array([[3.0, 0.0], [-3.0, 0.0], [0.0, 3.0]])
    x = np.vstack([c + 0.1 * rng.standard_normal((10, 2)) for c in centers_true])
    assign = kmeans_cluster(x, 3, seed=0)
    fitted = np.array([x[assign == j].mean(axis=0) for j in range(3)])
    random_assign = rng.integers(0, 3, size=30)
    random_centers = np.array(
        [x[random_assign == j].mean(axis=0) if np.any(random_assign == j) else x.mean(axis=0) for j in range(3)]
    )
    assert inertia(x, fitted, assign) <= inertia(x, random_centers, random_assign)


def test_kmeans_deterministic():
    rng = seeded_rng(6)
    x = rng.standard_normal((25, 3))
    assert np.array_equal(kmeans_cluster(x, 4, seed=9), kmeans_cluster(x, 4, seed=9))


def test_kmeans_k_too_large():
    with pytest.raises(KTooLarge):
        kmeans_cluster(np.eye(3), 4, seed=0)


# --- NMI ---------------------------------------------------------------------

def test_nmi_identical_partitions():
    assert nmi([0, 0, 1, 1, 2], [5, 5, 7, 7, 9]) == 1.0


def test_nmi_single_cluster_vs_balanced():
    assert nmi([0, 0, 0, 0], [0, 0, 1, 1]) == 0.0


def test_nmi_both_single_cluster():
    assert nmi([3, 3, 3], [1, 1, 1]) == 1.0


def test_nmi_matches_contingency_oracle():
    rng = seeded_rng(12)
    for _ in range(10):
        pred = rng.integers(0, 4, size=30)
        truth = rng.integers(0, 3, size=30)
        assert abs(nmi(pred, truth) - nmi_bruteforce(pred.tolist(), truth.tolist())) < 1e-12


def test_nmi_symmetric_and_relabel_invariant():
    rng = seeded_rng(13)
    pred = rng.integers(0, 4, size=40)
    truth = rng.integers(0, 3, size=40)
    assert abs(nmi(pred, truth) - nmi(truth, pred)) < 1e-12
    relabeled = (pred + 17) * 3
    assert abs(nmi(pred, truth) - nmi(relabeled, truth)) < 1e-12


def test_nmi_length_mismatch():
    with pytest.raises(LengthMismatch):
        nmi([0, 1], [0, 1, 2])


# --- pairwise F1 ---------------------------------------------------------------

def test_f1_identical_partitions():
    assert f1_clustering([0, 0, 1, 2], [4, 4, 5, 6]) == 1.0


def test_f1_all_singletons_predicted():
    assert f1_clustering([0, 1, 2, 3], [0, 0, 1, 1]) == 0.0


def test_f1_matches_pair_enumeration():
    rng = seeded_rng(14)
    for _ in range(10):
        pred = rng.integers(0, 4, size=25)
        truth = rng.integers(0, 3, size=25)
        assert abs(f1_clustering(pred, truth) - f1_bruteforce(pred.tolist(), truth.tolist())) < 1e-12


def test_f1_one_iff_identical_up_to_relabeling():
    rng = seeded_rng(15)
    truth = rng.integers(0, 3, size=20)
    assert f1_clustering(truth * 7 + 2, truth) == 1.0
    broken = truth.copy()
    broken[0] = broken[0] + 1 if broken[0] < 2 else 0
    assert f1_clustering(broken, truth) < 1.0


# --- mAP ----------------------------------------------------------------------

def test_map_all_same_class():
    batch = seeded_batch(20, n=10, num_classes=1)
    assert mean_average_precision(batch, cutoff=5) == 1.0


def test_map_query_without_relevant_rows():
    x = np.eye(3)
    batch = EmbeddingBatch(x, [0, 1, 1])
    got = mean_average_precision(batch, cutoff=2)
    oracle = map_bruteforce(batch.features, batch.labels, 2)
    assert got == oracle
    assert got < 1.0  # the singleton query contributed 0


def test_map_matches_bruteforce():
    for seed in range(6):
        batch = seeded_batch(seed + 30, n=40)
        for cutoff in (1, 5, 100):
            got = mean_average_precision(batch, cutoff)
            assert abs(got - map_bruteforce(batch.features, batch.labels, cutoff)) < 1e-12
            assert 0.0 <= got <= 1.0


# --- density -------------------------------------------------------------------

def test_density_zero_numerator():
    x = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    batch = EmbeddingBatch(x, [0, 0, 1, 1])
    assert embedding_density(batch) == 0.0


def test_density_degenerate_denominator():
    x = np.tile([1.0, 0.0], (4, 1))
    batch = EmbeddingBatch(x, [0, 0, 1, 1])
    with pytest.raises(DegenerateInput):
        embedding_density(batch)


def test_density_matches_bruteforce():
    for seed in range(5):
        batch = seeded_batch(seed + 50, n=25)
        got = embedding_density(batch)
        assert abs(got - density_bruteforce(batch.features, batch.labels)) < 1e-12


def test_density_rotation_invariant():
    rng = seeded_rng(44)
    batch = seeded_batch(44, n=20, d=5)
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    rotated = EmbeddingBatch(batch.features @ q, batch.labels)
    assert abs(embedding_density(batch) - embedding_density(rotated)) < 1e-9


# --- proxy heat and the bundle --------------------------------------------------

def test_proxy_heat_orthonormal():
    proxies = ProxySet(np.eye(3), [0, 1, 2])
    assert np.array_equal(proxy_similarity_heat(proxies), np.eye(3))


def test_proxy_heat_identical_proxies():
    proxies = ProxySet(np.tile([1.0, 0.0], (3, 1)), [0, 1, 2])
    assert np.array_equal(proxy_similarity_heat(proxies), np.ones((3, 3)))


def test_evaluate_bundle_consistency():
    batch = seeded_batch(60, n=30)
    report = evaluate(batch, ks=(1, 2), map_cutoff=10, seed=1)
    assert report.recall_at == recall_at_k(batch, [1, 2])
    clusters = kmeans_cluster(batch.features, batch.num_classes(), seed=1)
    assert report.nmi == nmi(clusters, batch.labels)
    assert report.f1 == f1_clustering(clusters, batch.labels)
    assert report.map_at[10] == mean_average_precision(batch, 10)
    assert report.density == embedding_density(batch)


def test_evaluate_handles_singleton_classes():
    report = evaluate(EmbeddingBatch(np.eye(3), [0, 1, 2]), ks=(1,), map_cutoff=2, seed=0)
    assert report.recall_at[1] == 0.0
    assert report.density is None
