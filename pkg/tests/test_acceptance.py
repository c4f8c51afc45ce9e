"""Acceptance gate: every criterion runs at its stated tolerance and prints a
pass/fail line (visible with ``pytest tests/test_acceptance.py -v -s``)."""

import functools
import json
import math
import time

import numpy as np
import pytest

import anticollapse as ac
from anticollapse.cli import main as cli_main
from anticollapse.containers import EmbeddingBatch
from anticollapse.data import BatchPlan, MixtureConfig, generate_mixture, save_embeddings
from anticollapse.errors import BadMagic, TruncatedFile
from anticollapse.gradcheck import run_suite
from anticollapse.linalg import seeded_rng
from anticollapse.losses import AntiCollapseConfig
from anticollapse.rates import RateParams, coding_rate
from anticollapse.training import TrainConfig, train
from oracles import (
    density_bruteforce,
    f1_bruteforce,
    map_bruteforce,
    nmi_bruteforce,
    random_unit_rows,
    recall_at_k_bruteforce,
)

HALF = RateParams(0.5)


def criterion(label):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"{label}: FAIL")
                raise
            print(f"{label}: PASS")

        return wrapper

    return decorate


# --- AC1: gradient fidelity ------------------------------------------------------

@criterion("AC1 gradient fidelity (analytic vs central differences)")
def test_ac1_gradient_fidelity():
    started = time.time()
    results = run_suite(cases=20, seed=0, step=1e-5)
    elapsed = time.time() - started
    assert set(results) == {
        "coding_rate", "pair_anticollapse", "proxy_nca", "proxy_anchor", "proxy_anticollapse",
    }
    for family, error in results.items():
        assert error < 1e-5, f"{family} max relative error {error:.3e}"
    assert elapsed < 10.0, f"gradient suite took {elapsed:.1f}s"


# --- AC2: Gram equivalence --------------------------------------------------------

@criterion("AC2 Gram-side equivalence over 100 seeded matrices")
def test_ac2_gram_equivalence():
    rng = seeded_rng(2)
    shapes = []
    for _ in range(34):
        shapes.append((int(rng.integers(2, 8)), int(rng.integers(8, 16))))  # n < d
    for _ in range(33):
        n = int(rng.integers(2, 12))
        shapes.append((n, n))  # n = d
    for _ in range(33):
        shapes.append((int(rng.integers(8, 16)), int(rng.integers(2, 8))))  # n > d
    assert len(shapes) == 100
    for n, d in shapes:
        x = rng.standard_normal((n, d))
        delta = abs(coding_rate(x, HALF, side="features") - coding_rate(x, HALF, side="samples"))
        assert delta < 1e-9, f"shape {(n, d)} mismatch {delta:.2e}"


# --- AC3: closed-form rates --------------------------------------------------------

@criterion("AC3 closed-form rates at d=2, eps=0.5")
def test_ac3_closed_forms():
    one_row = np.array([[1.0, 0.0]])
    orthogonal = np.eye(2)
    duplicated = np.array([[1.0, 0.0], [1.0, 0.0]])
    assert abs(coding_rate(one_row, HALF) - math.log(3.0)) < 1e-12
    assert abs(coding_rate(orthogonal, HALF) - math.log(5.0)) < 1e-12
    assert abs(coding_rate(duplicated, HALF) - math.log(3.0)) < 1e-12
    for x in (one_row, orthogonal, duplicated):
        n, d = x.shape
        assert ac.total_coding_length(x, HALF) == (n + d) * coding_rate(x, HALF)


# --- AC4: proxy orthogonalization ---------------------------------------------------

@criterion("AC4 proxy orthogonalization (m=8, d=32, 500 steps)")
def test_ac4_proxy_orthogonalization():
    started = time.time()
    initial = ac.init_proxies(8, 32, seed=0)
    final, trace = ac.orthogonalize_proxies_demo(8, 32, steps=500, lr=0.1, params=HALF, seed=0)
    elapsed = time.time() - started
    assert trace[-1] < 0.05, f"final max off-diagonal |cos| = {trace[-1]:.4f}"
    assert coding_rate(final.proxies, HALF) > coding_rate(initial.proxies, HALF)
    assert elapsed < 10.0, f"orthogonalization took {elapsed:.1f}s"


# --- AC5 + AC7: paired anti-collapse vs proxy-anchor runs ----------------------------
#
# Protocol: 16 classes x 8 samples in d=32 (non-orthonormal unit means,
# noise 0.3), identical configs except the loss. The learning rate is chosen
# so the composite objective (whose embedding gradient carries the factor
# nu=0.0035) trains at a sensible effective step size; the proxy-anchor
# baseline then runs with ~285x larger effective embedding steps at the same
# setting, which is what exposes its structural degradation at this scale.

PAIRED_SEED = 7


@pytest.fixture(scope="module")
def paired_runs():
    data = generate_mixture(
        MixtureConfig(16, 8, 32, noise_sigma=0.3, seed=PAIRED_SEED, orthonormal_means=False)
    )
    common = dict(
        lr=0.4,
        proxy_lr_multiplier=20.0,
        epochs=2500,
        eval_every=100,
        plan=BatchPlan(8, 8),
        seed=PAIRED_SEED,
    )
    started = time.time()
    _, pa_trace = train(TrainConfig(loss="pa", **common), data)
    _, antico_trace = train(
        TrainConfig(
            loss="antico",
            antico=AntiCollapseConfig(nu=0.0035, variant="mini-batch", base="proxy-anchor"),
            **common,
        ),
        data,
    )
    elapsed = time.time() - started
    return pa_trace, antico_trace, elapsed


@criterion("AC5 anti-collapse keeps the proxy rate high and stable")
def test_ac5_anticollapse_trace(paired_runs):
    pa_trace, antico_trace, elapsed = paired_runs
    pa_proxy = pa_trace.column("r_proxy")
    antico_proxy = antico_trace.column("r_proxy")
    assert antico_proxy[-1] > pa_proxy[-1], (
        f"final r_proxy antico={antico_proxy[-1]:.3f} vs pa={pa_proxy[-1]:.3f}"
    )
    assert antico_proxy.std() < pa_proxy.std(), (
        f"r_proxy std antico={antico_proxy.std():.4f} vs pa={pa_proxy.std():.4f}"
    )
    assert elapsed < 60.0, f"paired runs took {elapsed:.1f}s"


@criterion("AC7 structural ordering at the best-recall checkpoints")
def test_ac7_structural_ordering(paired_runs):
    pa_trace, antico_trace, _ = paired_runs
    pa_best = pa_trace.records[int(np.argmax(pa_trace.column("recall1")))]
    antico_best = antico_trace.records[int(np.argmax(antico_trace.column("recall1")))]
    assert antico_best.r_global < pa_best.r_global, (
        f"r_global antico={antico_best.r_global:.3f} vs pa={pa_best.r_global:.3f}"
    )
    assert antico_best.r_intra < pa_best.r_intra, (
        f"r_intra antico={antico_best.r_intra:.3f} vs pa={pa_best.r_intra:.3f}"
    )
    assert antico_best.r_proxy > pa_best.r_proxy, (
        f"r_proxy antico={antico_best.r_proxy:.3f} vs pa={pa_best.r_proxy:.3f}"
    )


# --- AC6: metric oracles --------------------------------------------------------------

@criterion("AC6 metric oracles (recall, nmi, f1, mAP, density)")
def test_ac6_metric_oracles():
    rng = seeded_rng(6)
    for instance in range(10):
        n = int(rng.integers(12, 51))
        d = int(rng.integers(3, 7))
        num_classes = int(rng.integers(2, 6))
        labels = rng.integers(0, num_classes, size=n)
        labels[:num_classes] = np.arange(num_classes)  # keep every class populated
        feats = random_unit_rows(rng, n, d)
        batch = EmbeddingBatch(feats, labels)

        for k in (1, 4):
            assert ac.recall_at_k(batch, [k])[k] == recall_at_k_bruteforce(feats, labels, k)
        for cutoff in (3, 1000):
            got = ac.mean_average_precision(batch, cutoff)
            assert abs(got - map_bruteforce(feats, labels, cutoff)) < 1e-12
        assert abs(ac.embedding_density(batch) - density_bruteforce(feats, labels)) < 1e-12

        pred = ac.kmeans_cluster(feats, num_classes, seed=instance)
        assert abs(ac.nmi(pred, labels) - nmi_bruteforce(pred.tolist(), labels.tolist())) < 1e-12
        assert abs(ac.f1_clustering(pred, labels) - f1_bruteforce(pred.tolist(), labels.tolist())) < 1e-12


# --- AC8: persistence ------------------------------------------------------------------

@criterion("AC8 persistence round trip and corruption errors")
def test_ac8_persistence(tmp_path):
    rng = seeded_rng(8)
    for seed in range(5):
        labels = rng.integers(0, 4, size=10)
        batch = EmbeddingBatch(random_unit_rows(rng, 10, 6), labels)
        path = tmp_path / f"roundtrip{seed}.acem"
        save_embeddings(batch, path)
        loaded = ac.load_embeddings(path)
        assert loaded.features.tobytes() == batch.features.tobytes()
        assert loaded.labels.tolist() == batch.labels.tolist()

    path = tmp_path / "target.acem"
    save_embeddings(batch, path)
    corrupted = bytearray(path.read_bytes())
    corrupted[:4] = b"XXXX"
    bad_path = tmp_path / "bad.acem"
    bad_path.write_bytes(bytes(corrupted))
    with pytest.raises(BadMagic):
        ac.load_embeddings(bad_path)
    cut_path = tmp_path / "cut.acem"
    cut_path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(TruncatedFile):
        ac.load_embeddings(cut_path)


# --- AC9: CLI determinism ----------------------------------------------------------------

@criterion("AC9 deterministic CLI runs (byte-identical artifacts)")
def test_ac9_cli_determinism(tmp_path):
    out_dir = tmp_path / "run"
    argv = [
        "train",
        "--synthetic", "classes=6", "per-class=5", "dim=12", "noise=0.3",
        "--loss", "antico", "--nu", "0.0035", "--variant", "mini-batch",
        "--epochs", "6", "--eval-every", "2",
        "--classes-per-batch", "3", "--samples-per-class", "3",
        "--seed", "21", "--out-dir", str(out_dir),
    ]
    assert cli_main(argv) == 0
    artifact_names = ["trace.csv", "trace.jsonl", "embeddings.acem", "proxies.acem"]
    first = {name: (out_dir / name).read_bytes() for name in artifact_names}
    manifest_first = json.loads((out_dir / "manifest.json").read_text())

    assert cli_main(argv) == 0
    for name in artifact_names:
        assert (out_dir / name).read_bytes() == first[name], f"{name} differs between runs"
    manifest_second = json.loads((out_dir / "manifest.json").read_text())
    for manifest in (manifest_first, manifest_second):
        manifest.pop("started_at")
        manifest.pop("finished_at")
    assert manifest_first == manifest_second
