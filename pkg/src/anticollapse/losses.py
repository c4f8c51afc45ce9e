"""Trainable objectives on unit-sphere embeddings and class proxies.

Every loss returns a :class:`LossResult` carrying the scalar value and
analytic gradients for the operands it differentiates. All exponential
aggregations go through log-sum-exp so values and gradients stay finite for
scaling factors up to 64 on any unit-norm input.

The ``*_raw`` helpers operate on plain arrays without unit-norm validation;
they exist so finite-difference checks can evaluate the same formulas at
slightly off-sphere points. Public entry points validate their containers and
delegate to them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .containers import EmbeddingBatch, LossResult, ProxySet
from .errors import (
    EmptyBatch,
    EmptySelection,
    MissingProxy,
    NoNegativeProxies,
)
from .rates import RateParams, coding_rate, coding_rate_grad
from .validation import check_matrix, check_unit_rows

#: Row-norm tolerance for the public cosine-similarity operation.
COSINE_NORM_TOL = 1e-6

VARIANTS = ("all-class", "mini-batch")
BASE_LOSSES = ("proxy-anchor", "proxy-nca")


@dataclass(frozen=True)
class ProxyAnchorParams:
    """Margin and scaling of the proxy-anchor objective."""

    alpha: float = 32.0
    delta: float = 0.1

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class AntiCollapseConfig:
    """Configuration of the composite proxy anti-collapse loss.

    ``nu`` weighs the base proxy loss added to the negated proxy coding rate;
    useful values live in roughly [0.001, 0.1]. ``variant`` selects which
    proxies enter the rate term (all classes, or only classes present in the
    mini-batch).
    """

    nu: float = 0.0035
    rate: RateParams = field(default_factory=RateParams)
    variant: str = "mini-batch"
    base: str = "proxy-anchor"
    anchor: ProxyAnchorParams = field(default_factory=ProxyAnchorParams)

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError(f"nu must be nonnegative, got {self.nu}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.base not in BASE_LOSSES:
            raise ValueError(f"base must be one of {BASE_LOSSES}, got {self.base!r}")


def cosine_similarity_matrix(a, b) -> np.ndarray:
    """Pairwise cosine similarities ``A @ B.T`` for unit-norm rows."""
    a = check_matrix(a, "A")
    b = check_matrix(b, "B")
    check_unit_rows(a, COSINE_NORM_TOL, "A")
    check_unit_rows(b, COSINE_NORM_TOL, "B")
    return a @ b.T


def _log1p_sum_exp(z: np.ndarray) -> tuple[float, np.ndarray]:
    """Stable ``log(1 + sum(exp(z)))`` plus the weights ``exp(z) / (1 + sum(exp(z)))``."""
    if z.size == 0:
        return 0.0, z
    m = max(0.0, float(np.max(z)))
    e = np.exp(z - m)
    denom = np.exp(-m) + float(np.sum(e))
    return m + float(np.log(denom)), e / denom


# ---------------------------------------------------------------------------
# pair anti-collapse
# ---------------------------------------------------------------------------

def _pair_anticollapse_raw(x: np.ndarray, params: RateParams) -> tuple[float, np.ndarray]:
    value = -coding_rate(x, params, side="samples")
    grad = -coding_rate_grad(x, params)
    return value, grad


def pair_anticollapse(batch: EmbeddingBatch, params: RateParams = RateParams()) -> LossResult:
    """Label-free anti-collapse loss: negated coding rate of the batch.

    Uses the n x n similarity form of the Gram matrix; collapsing rows raise
    the loss, spreading them lowers it.
    """
    value, grad = _pair_anticollapse_raw(batch.features, params)
    return LossResult(value=value, grad_embeddings=grad)


# ---------------------------------------------------------------------------
# proxy-NCA
# ---------------------------------------------------------------------------

def _proxy_nca_raw(
    x: np.ndarray,
    labels: np.ndarray,
    proxies: np.ndarray,
    class_ids: np.ndarray,
    include_positive: bool = False,
) -> tuple[float, np.ndarray, np.ndarray]:
    n = x.shape[0]
    sims = x @ proxies.T
    col_of = {int(c): i for i, c in enumerate(class_ids)}
    grad_s = np.zeros_like(sims)
    total = 0.0
    for i in range(n):
        label = int(labels[i])
        if label not in col_of:
            raise MissingProxy(f"no proxy for class {label}")
        pos = col_of[label]
        if np.all(class_ids == label):
            raise NoNegativeProxies(f"anchor {i} (class {label}) has no negative proxy")
        if include_positive:
            neg_cols = np.arange(proxies.shape[0])
        else:
            neg_cols = np.flatnonzero(class_ids != label)
        z = sims[i, neg_cols]
        m = float(np.max(z))
        e = np.exp(z - m)
        lse = m + float(np.log(np.sum(e)))
        total += -sims[i, pos] + lse
        grad_s[i, pos] += -1.0 / n
        grad_s[i, neg_cols] += (e / np.sum(e)) / n
    value = total / n
    return value, grad_s @ proxies, grad_s.T @ x


def proxy_nca(
    batch: EmbeddingBatch,
    proxies: ProxySet,
    include_positive_in_denominator: bool = False,
) -> LossResult:
    """Proxy-NCA loss, averaged over anchors.

    The denominator sums over negative proxies only; set
    ``include_positive_in_denominator`` for the softmax-over-all variant.
    """
    value, grad_x, grad_p = _proxy_nca_raw(
        batch.features,
        batch.labels,
        proxies.proxies,
        proxies.class_ids,
        include_positive_in_denominator,
    )
    return LossResult(value=value, grad_embeddings=grad_x, grad_proxies=grad_p)


# ---------------------------------------------------------------------------
# proxy anchor
# ---------------------------------------------------------------------------

def _proxy_anchor_raw(
    x: np.ndarray,
    labels: np.ndarray,
    proxies: np.ndarray,
    class_ids: np.ndarray,
    params: ProxyAnchorParams,
) -> tuple[float, np.ndarray, np.ndarray, bool]:
    if x.shape[0] == 0:
        raise EmptyBatch("proxy_anchor needs at least one sample")
    alpha, delta = params.alpha, params.delta
    m = proxies.shape[0]
    sims = x @ proxies.T
    pos_mask = labels[:, None] == class_ids[None, :]
    grad_s = np.zeros_like(sims)

    anchored = np.flatnonzero(pos_mask.any(axis=0))  # proxies with >= 1 positive
    pos_term = 0.0
    for j in anchored:
        rows = np.flatnonzero(pos_mask[:, j])
        val, w = _log1p_sum_exp(-alpha * (sims[rows, j] - delta))
        pos_term += val
        grad_s[rows, j] += -alpha * w / anchored.size
    if anchored.size:
        pos_term /= anchored.size

    neg_term = 0.0
    for j in range(m):
        rows = np.flatnonzero(~pos_mask[:, j])
        val, w = _log1p_sum_exp(alpha * (sims[rows, j] + delta))
        neg_term += val
        grad_s[rows, j] += alpha * w / m
    neg_term /= m

    value = pos_term + neg_term
    return value, grad_s @ proxies, grad_s.T @ x, anchored.size == 0


def proxy_anchor(
    batch: EmbeddingBatch,
    proxies: ProxySet,
    params: ProxyAnchorParams = ProxyAnchorParams(),
) -> LossResult:
    """Proxy-anchor loss with gradients for embeddings and proxies.

    Positive term averages over proxies with at least one same-class sample
    in the batch; if no proxy has one, that term is zero and a
    ``RuntimeWarning`` reports it.
    """
    value, grad_x, grad_p, no_positives = _proxy_anchor_raw(
        batch.features, batch.labels, proxies.proxies, proxies.class_ids, params
    )
    if no_positives:
        warnings.warn(
            "no proxy has a positive sample in this batch; positive term is 0",
            RuntimeWarning,
            stacklevel=2,
        )
    return LossResult(
        value=value,
        grad_embeddings=grad_x,
        grad_proxies=grad_p,
        notes={"positive_term_empty": no_positives},
    )


# ---------------------------------------------------------------------------
# proxy coding rate and the composite anti-collapse loss
# ---------------------------------------------------------------------------

def _select_proxy_rows(class_ids: np.ndarray, class_filter) -> np.ndarray:
    if class_filter is None:
        return np.arange(class_ids.size)
    wanted = {int(c) for c in class_filter}
    rows = np.flatnonzero(np.fromiter((int(c) in wanted for c in class_ids), dtype=bool))
    if rows.size == 0:
        raise EmptySelection("class filter selects no proxies")
    return rows


def proxy_rate(
    proxies: ProxySet,
    class_filter=None,
    params: RateParams = RateParams(),
) -> float:
    """Coding rate of the selected proxy rows (all classes, or a class subset)."""
    rows = _select_proxy_rows(proxies.class_ids, class_filter)
    return coding_rate(proxies.proxies[rows], params)


def _proxy_anticollapse_raw(
    x: np.ndarray,
    labels: np.ndarray,
    proxies: np.ndarray,
    class_ids: np.ndarray,
    config: AntiCollapseConfig,
) -> tuple[float, np.ndarray, np.ndarray]:
    if config.variant == "mini-batch":
        rows = _select_proxy_rows(class_ids, np.unique(labels))
    else:
        rows = np.arange(class_ids.size)
    selected = proxies[rows]
    rate = coding_rate(selected, config.rate)
    grad_p = np.zeros_like(proxies)
    grad_p[rows] = -coding_rate_grad(selected, config.rate)

    if config.nu == 0.0:
        return -rate, np.zeros_like(x), grad_p

    if config.base == "proxy-anchor":
        base_value, base_gx, base_gp, _ = _proxy_anchor_raw(
            x, labels, proxies, class_ids, config.anchor
        )
    else:
        base_value, base_gx, base_gp = _proxy_nca_raw(x, labels, proxies, class_ids)
    value = -rate + config.nu * base_value
    return value, config.nu * base_gx, grad_p + config.nu * base_gp


def proxy_anticollapse(
    batch: EmbeddingBatch,
    proxies: ProxySet,
    config: AntiCollapseConfig = AntiCollapseConfig(),
) -> LossResult:
    """Composite loss: negated proxy coding rate plus ``nu`` times a base proxy loss.

    The rate term touches only the selected proxy rows (all classes or the
    batch's classes); embeddings receive gradient only through the base loss,
    so ``nu = 0`` leaves them untouched.
    """
    value, grad_x, grad_p = _proxy_anticollapse_raw(
        batch.features, batch.labels, proxies.proxies, proxies.class_ids, config
    )
    return LossResult(value=value, grad_embeddings=grad_x, grad_proxies=grad_p)
