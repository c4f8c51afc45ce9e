"""Synthetic data generation, embedding persistence, and batch sampling.

File format (binary, little-endian): magic ``ACEM``, one version byte,
uint32 row and column counts, then the class ids as uint32 and the feature
matrix as row-major float64. Round trips are bit-exact. Files ending in
``.csv`` use the header ``label,f0,...,f{d-1}`` with full-precision floats.
"""

from __future__ import annotations

import csv
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .containers import EmbeddingBatch
from .errors import BadMagic, ClassTooSmall, NonFiniteValue, NotNormalized, TooManyClasses, TruncatedFile
from .linalg import seeded_rng
from .validation import normalize_rows

MAGIC = b"ACEM"
FORMAT_VERSION = 1

#: Row-norm slack accepted on load before renormalization kicks in.
LOAD_NORM_TOL = 1e-9


@dataclass(frozen=True)
class MixtureConfig:
    """Spherical Gaussian-mixture stand-in for a real embedding dataset."""

    num_classes: int
    samples_per_class: int
    dim: int
    noise_sigma: float = 0.25
    seed: int = 0
    orthonormal_means: bool = True

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")


@dataclass(frozen=True)
class BatchPlan:
    """P classes x K samples per batch; defaults mirror a 90-sample batch."""

    classes_per_batch: int = 30
    samples_per_class: int = 3

    def __post_init__(self):
        if self.classes_per_batch < 2:
            raise ValueError("classes_per_batch must be >= 2")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")

    @property
    def batch_size(self) -> int:
        return self.classes_per_batch * self.samples_per_class


def generate_mixture(config: MixtureConfig) -> EmbeddingBatch:
    """Sample a labeled unit-sphere mixture, deterministic per seed.

    Class means are drawn standard normal and orthonormalized (QR) when
    requested and possible; samples add isotropic noise and are re-projected
    to the sphere. With zero noise every sample equals its class mean.
    """
    rng = seeded_rng(config.seed)
    means = rng.standard_normal((config.num_classes, config.dim))
    if config.orthonormal_means:
        if config.num_classes > config.dim:
            raise TooManyClasses(
                f"cannot orthonormalize {config.num_classes} means in {config.dim} dimensions"
            )
        q, r = np.linalg.qr(means.T)
        means = (q * np.sign(np.diag(r))).T
    else:
        means = normalize_rows(means, "means")

    labels = np.repeat(np.arange(config.num_classes), config.samples_per_class)
    base = means[labels]
    if config.noise_sigma == 0.0:
        return EmbeddingBatch(base.copy(), labels)
    noisy = base + config.noise_sigma * rng.standard_normal(base.shape)
    return EmbeddingBatch(normalize_rows(noisy, "samples"), labels)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_embeddings(batch: EmbeddingBatch, path) -> None:
    """Write a batch to ``path``; binary by default, CSV when it ends in .csv."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        _save_csv(batch, path)
        return
    n, d = batch.features.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([FORMAT_VERSION]))
        fh.write(struct.pack("<II", n, d))
        fh.write(batch.labels.astype("<u4").tobytes())
        fh.write(batch.features.astype("<f8").tobytes())


def load_embeddings(path, renormalize: bool = False) -> EmbeddingBatch:
    """Read a batch written by :func:`save_embeddings`.

    Off-norm rows raise :class:`NotNormalized` unless ``renormalize`` is set,
    in which case they are warned about and projected back to the sphere.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        features, labels = _load_csv(path)
    else:
        features, labels = _load_binary(path)
    if not np.all(np.isfinite(features)):
        raise NonFiniteValue(f"{path} contains non-finite features")
    norms = np.linalg.norm(features, axis=1)
    worst = float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0
    if worst > LOAD_NORM_TOL:
        if not renormalize:
            raise NotNormalized(
                f"{path} rows deviate from unit norm by {worst:.3e}; "
                "pass renormalize=True to project them back"
            )
        warnings.warn(f"renormalizing rows of {path} (deviation {worst:.3e})", RuntimeWarning)
        features = normalize_rows(features)
    return EmbeddingBatch(features, labels)


def _load_binary(path: Path) -> tuple[np.ndarray, np.ndarray]:
    blob = path.read_bytes()
    if len(blob) < len(MAGIC) + 1 + 8:
        if blob[: len(MAGIC)] != MAGIC:
            raise BadMagic(f"{path} does not start with {MAGIC!r}")
        raise TruncatedFile(f"{path} ends inside the header")
    if blob[: len(MAGIC)] != MAGIC:
        raise BadMagic(f"{path} does not start with {MAGIC!r}")
    version = blob[len(MAGIC)]
    if version != FORMAT_VERSION:
        raise BadMagic(f"{path} has unsupported format version {version}")
    offset = len(MAGIC) + 1
    n, d = struct.unpack_from("<II", blob, offset)
    offset += 8
    expected = offset + 4 * n + 8 * n * d
    if len(blob) < expected:
        raise TruncatedFile(f"{path} has {len(blob)} bytes, expected {expected}")
    labels = np.frombuffer(blob, dtype="<u4", count=n, offset=offset).astype(np.int64)
    offset += 4 * n
    features = np.frombuffer(blob, dtype="<f8", count=n * d, offset=offset)
    return features.reshape(n, d).copy(), labels


def _save_csv(batch: EmbeddingBatch, path: Path) -> None:
    n, d = batch.features.shape
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{j}" for j in range(d)])
        for i in range(n):
            writer.writerow([int(batch.labels[i])] + [repr(float(v)) for v in batch.features[i]])


def _load_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not header or header[0] != "label":
            raise BadMagic(f"{path} lacks the expected 'label,f0,...' header")
        rows = list(reader)
    if not rows:
        raise TruncatedFile(f"{path} has a header but no rows")
    d = len(header) - 1
    labels = np.empty(len(rows), dtype=np.int64)
    features = np.empty((len(rows), d))
    for i, row in enumerate(rows):
        if len(row) != d + 1:
            raise TruncatedFile(f"{path} row {i + 2} has {len(row)} fields, expected {d + 1}")
        labels[i] = int(row[0])
        features[i] = [float(v) for v in row[1:]]
    return features, labels


def split_classes(batch: EmbeddingBatch, holdout_fraction: float = 0.5, seed=0):
    """Split a batch into two batches with disjoint class sets (transfer-style).

    Classes are shuffled deterministically; the last ``holdout_fraction`` of
    them form the held-out batch. Both sides keep at least one class.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must be in (0, 1)")
    classes = np.unique(batch.labels)
    if classes.size < 2:
        raise ValueError("need at least two classes to split")
    order = seeded_rng(seed).permutation(classes)
    num_holdout = min(classes.size - 1, max(1, int(round(holdout_fraction * classes.size))))
    holdout = set(order[classes.size - num_holdout :].tolist())
    mask = np.fromiter((int(label) in holdout for label in batch.labels), dtype=bool)
    seen = EmbeddingBatch(batch.features[~mask], batch.labels[~mask])
    held_out = EmbeddingBatch(batch.features[mask], batch.labels[mask])
    return seen, held_out


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def batch_sampler(labels, plan: BatchPlan, seed, with_replacement: bool = False) -> list[np.ndarray]:
    """One epoch of P*K index batches, deterministic per seed.

    Classes are shuffled, then consumed in chunks of P; each chosen class
    contributes K of its rows (without replacement inside a batch). Leftover
    classes that cannot fill a whole chunk are dropped. Every batch holds at
    least two classes because the plan requires P >= 2.
    """
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    if classes.size < plan.classes_per_batch:
        raise ValueError(
            f"need at least {plan.classes_per_batch} classes, got {classes.size}"
        )
    if not with_replacement:
        small = classes[counts < plan.samples_per_class]
        if small.size:
            raise ClassTooSmall(
                f"classes {small.tolist()} have fewer than {plan.samples_per_class} samples"
            )
    rng = seeded_rng(seed)
    by_class = {int(c): np.flatnonzero(labels == c) for c in classes}
    order = rng.permutation(classes)
    batches = []
    full_chunks = classes.size // plan.classes_per_batch
    for chunk in range(full_chunks):
        chosen = order[chunk * plan.classes_per_batch : (chunk + 1) * plan.classes_per_batch]
        rows = [
            rng.choice(by_class[int(c)], size=plan.samples_per_class, replace=with_replacement)
            for c in chosen
        ]
        batches.append(np.concatenate(rows))
    return batches
