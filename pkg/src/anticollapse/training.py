"""Projected-gradient training of embeddings and proxies on the unit sphere.

Desk-scale setup: the embedding vectors themselves are the trainable
parameters (no backbone), updated by plain gradient descent and re-projected
to unit norm after every step. Proxies train with a configurable learning
rate multiplier. Runs are bit-deterministic for a fixed (config, seed, data).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .containers import EmbeddingBatch, LossResult, ProxySet
from .data import BatchPlan, batch_sampler
from .errors import NonFiniteGradient
from .linalg import seeded_rng
from .losses import (
    AntiCollapseConfig,
    ProxyAnchorParams,
    pair_anticollapse,
    proxy_anchor,
    proxy_nca,
    proxy_anticollapse,
)
from .metrics import kmeans_cluster, nmi, recall_at_k
from .rates import RateParams, coding_rate_grad, rate_report
from .validation import normalize_rows

LOSS_NAMES = ("pa", "pnca", "pair", "antico")

TRACE_COLUMNS = ("epoch", "loss", "r_global", "r_intra", "r_proxy", "density", "recall1", "nmi")

# The desk-scale default learning rate (1e-2) targets direct embedding
# optimization; full-scale backbone training with an adaptive optimizer uses
# rates around this reference instead.
BACKBONE_REFERENCE_LR = 1e-5


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs besides the data itself."""

    loss: str = "antico"
    antico: AntiCollapseConfig = field(default_factory=AntiCollapseConfig)
    anchor: ProxyAnchorParams = field(default_factory=ProxyAnchorParams)
    rate: RateParams = field(default_factory=RateParams)
    lr: float = 1e-2
    proxy_lr_multiplier: float = 100.0
    epochs: int = 100
    plan: BatchPlan = field(default_factory=BatchPlan)
    eval_every: int = 10
    seed: int = 0
    with_replacement: bool = False

    def __post_init__(self):
        if self.loss not in LOSS_NAMES:
            raise ValueError(f"loss must be one of {LOSS_NAMES}, got {self.loss!r}")
        if not self.lr >= 0:
            raise ValueError("lr must be nonnegative")
        if not self.proxy_lr_multiplier > 0:
            raise ValueError("proxy_lr_multiplier must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")


@dataclass(frozen=True)
class TrainState:
    """Current embeddings, proxies and epoch counter of a run."""

    embeddings: EmbeddingBatch
    proxies: ProxySet
    epoch: int
    rng: np.random.Generator


@dataclass(frozen=True)
class TraceRecord:
    epoch: int
    loss: float
    r_global: float
    r_intra: float
    r_proxy: float
    density: float
    recall1: float
    nmi: float


@dataclass
class TrainTrace:
    """Per-evaluation training history, serializable as CSV or JSON lines."""

    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in self.records:
            writer.writerow([repr(getattr(rec, c)) if c != "epoch" else rec.epoch for c in TRACE_COLUMNS])
        return buf.getvalue()

    def to_jsonl(self) -> str:
        lines = [
            json.dumps({c: getattr(rec, c) for c in TRACE_COLUMNS}, sort_keys=True)
            for rec in self.records
        ]
        return "".join(line + "\n" for line in lines)


def init_proxies(num_classes: int, dim: int, seed, class_ids=None) -> ProxySet:
    """Unit-normalized standard-normal proxies, deterministic per seed."""
    rng = seeded_rng(seed)
    vectors = normalize_rows(rng.standard_normal((num_classes, dim)), "proxies")
    if class_ids is None:
        class_ids = np.arange(num_classes)
    return ProxySet(vectors, class_ids)


def _evaluate_loss(batch: EmbeddingBatch, proxies: ProxySet, config: TrainConfig) -> LossResult:
    if config.loss == "pair":
        return pair_anticollapse(batch, config.rate)
    if config.loss == "pa":
        return proxy_anchor(batch, proxies, config.anchor)
    if config.loss == "pnca":
        return proxy_nca(batch, proxies)
    return proxy_anticollapse(batch, proxies, config.antico)


def _apply_update(matrix: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Subtract ``delta`` and re-project changed rows to the unit sphere.

    Rows with an identically-zero delta are left bit-untouched, which keeps
    zero-learning-rate steps and unselected proxy rows exact.
    """
    moved = np.any(delta != 0.0, axis=1)
    if not moved.any():
        return matrix
    out = matrix.copy()
    out[moved] = normalize_rows(out[moved] - delta[moved])
    return out


def train_step(state: TrainState, batch_rows, config: TrainConfig) -> tuple[TrainState, float]:
    """One projected-gradient step on the given batch rows.

    Returns the updated state and the pre-step loss value. Aborts with
    :class:`NonFiniteGradient` if the loss or any gradient is not finite.
    """
    rows = np.asarray(batch_rows)
    sub = EmbeddingBatch(state.embeddings.features[rows], state.embeddings.labels[rows])
    result = _evaluate_loss(sub, state.proxies, config)

    pieces = [np.asarray([result.value])]
    if result.grad_embeddings is not None:
        pieces.append(result.grad_embeddings.ravel())
    if result.grad_proxies is not None:
        pieces.append(result.grad_proxies.ravel())
    if not all(np.all(np.isfinite(p)) for p in pieces):
        raise NonFiniteGradient(
            f"non-finite loss/gradient at epoch {state.epoch} (loss={config.loss!r}, "
            f"value={result.value!r})"
        )

    features = state.embeddings.features
    if result.grad_embeddings is not None:
        delta = np.zeros_like(features)
        np.add.at(delta, rows, config.lr * result.grad_embeddings)
        features = _apply_update(features, delta)
    proxies = state.proxies
    if result.grad_proxies is not None:
        delta = config.lr * config.proxy_lr_multiplier * result.grad_proxies
        proxies = ProxySet(_apply_update(proxies.proxies, delta), proxies.class_ids)

    embeddings = EmbeddingBatch(features, state.embeddings.labels)
    return replace(state, embeddings=embeddings, proxies=proxies), float(result.value)


def _trace_record(
    state: TrainState,
    epoch: int,
    mean_loss: float,
    config: TrainConfig,
    eval_data: EmbeddingBatch | None,
) -> TraceRecord:
    batch = eval_data if eval_data is not None else state.embeddings
    report = rate_report(batch.features, batch.labels, state.proxies, config.rate)
    clusters = kmeans_cluster(batch.features, batch.num_classes(), seed=config.seed)
    return TraceRecord(
        epoch=epoch,
        loss=mean_loss,
        r_global=report.r_global,
        r_intra=report.r_intra,
        r_proxy=report.r_proxy,
        density=report.density,
        recall1=recall_at_k(batch, [1])[1],
        nmi=nmi(clusters, batch.labels),
    )


def train(
    config: TrainConfig,
    data: EmbeddingBatch,
    eval_data: EmbeddingBatch | None = None,
) -> tuple[TrainState, TrainTrace]:
    """Run the configured number of epochs over sampled batches.

    Proxies are derived from the label set and initialized from the run seed.
    Every ``eval_every`` epochs a trace record is computed on the full
    training data, or on ``eval_data`` when given (transfer-style evaluation,
    e.g. a held-out class split from :func:`~anticollapse.data.split_classes`).
    """
    classes = np.unique(data.labels)
    proxies = init_proxies(classes.size, data.dim, seed=config.seed, class_ids=classes)
    state = TrainState(
        embeddings=EmbeddingBatch(data.features.copy(), data.labels.copy()),
        proxies=proxies,
        epoch=0,
        rng=seeded_rng(config.seed),
    )
    trace = TrainTrace()
    for epoch in range(config.epochs):
        batches = batch_sampler(
            data.labels, config.plan, seed=(config.seed, epoch), with_replacement=config.with_replacement
        )
        losses = []
        for rows in batches:
            state, value = train_step(state, rows, config)
            losses.append(value)
        state = replace(state, epoch=epoch + 1)
        if (epoch + 1) % config.eval_every == 0:
            trace.records.append(
                _trace_record(state, epoch + 1, float(np.mean(losses)), config, eval_data)
            )
    return state, trace


def orthogonalize_proxies_demo(
    m: int,
    dim: int,
    steps: int,
    lr: float,
    params: RateParams = RateParams(),
    seed=0,
) -> tuple[ProxySet, np.ndarray]:
    """Pure gradient ascent on the proxy coding rate with per-step projection.

    Returns the final proxies and the per-step trace of the maximum
    off-diagonal absolute cosine similarity (zeros when m == 1).
    """
    proxies = init_proxies(m, dim, seed)
    vectors = proxies.proxies
    trace = np.zeros(steps)
    for step in range(steps):
        vectors = normalize_rows(vectors + lr * coding_rate_grad(vectors, params))
        if m > 1:
            sims = vectors @ vectors.T
            np.fill_diagonal(sims, 0.0)
            trace[step] = float(np.max(np.abs(sims)))
    return ProxySet(vectors, proxies.class_ids), trace
