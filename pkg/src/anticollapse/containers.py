"""Data containers: labeled embedding batches and class-proxy sets.

Both containers validate on construction (finite float64 data, unit-norm
rows, consistent labels) so downstream numeric code never re-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .validation import check_labels, check_matrix, check_unit_rows, normalize_rows

#: Row-norm tolerance accepted by the containers.
UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class EmbeddingBatch:
    """n x d matrix of unit-norm embedding rows with parallel class labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = check_matrix(self.features, "features")
        check_unit_rows(feats, UNIT_NORM_TOL, "features")
        labels = check_labels(self.labels, feats.shape[0])
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_unnormalized(cls, features, labels) -> "EmbeddingBatch":
        """Build a batch from arbitrary finite rows, projecting to unit norm."""
        feats = check_matrix(features, "features")
        return cls(normalize_rows(feats, "features"), labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def num_classes(self) -> int:
        return int(np.unique(self.labels).size)


@dataclass(frozen=True)
class ProxySet:
    """One unit-norm proxy vector per class."""

    proxies: np.ndarray
    class_ids: np.ndarray

    def __post_init__(self):
        mat = check_matrix(self.proxies, "proxies")
        check_unit_rows(mat, UNIT_NORM_TOL, "proxies")
        ids = check_labels(self.class_ids, mat.shape[0], "class_ids")
        if np.unique(ids).size != ids.size:
            raise ValueError("class_ids must be distinct (one proxy per class)")
        object.__setattr__(self, "proxies", mat)
        object.__setattr__(self, "class_ids", ids)

    @property
    def m(self) -> int:
        return self.proxies.shape[0]

    @property
    def dim(self) -> int:
        return self.proxies.shape[1]

    def column_of(self) -> dict[int, int]:
        """Map class id -> proxy row index."""
        return {int(c): i for i, c in enumerate(self.class_ids)}


@dataclass(frozen=True)
class LossResult:
    """Scalar loss value plus analytic gradients for the operands it used."""

    value: float
    grad_embeddings: np.ndarray | None = None
    grad_proxies: np.ndarray | None = None
    notes: dict = field(default_factory=dict)
