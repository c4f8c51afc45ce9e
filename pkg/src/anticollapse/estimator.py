"""Scikit-learn style front end for the projected-gradient trainer.

``AntiCollapseEmbedding`` optimizes the training rows directly on the unit
sphere together with one proxy per class, then classifies new points by the
nearest proxy. It follows the estimator contract (``get_params`` /
``set_params`` / ``fit`` returning ``self``), so it composes with model
selection utilities such as ``GridSearchCV``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .containers import EmbeddingBatch
from .data import BatchPlan
from .losses import AntiCollapseConfig, ProxyAnchorParams
from .rates import RateParams
from .training import TrainConfig, train
from .validation import check_labels, check_matrix, normalize_rows


class AntiCollapseEmbedding(ClassifierMixin, BaseEstimator):
    """Unit-sphere embedding optimizer with coding-rate anti-collapse losses.

    Parameters
    ----------
    loss : {"antico", "pa", "pnca", "pair"}
        Training objective: the composite anti-collapse loss, proxy anchor,
        proxy NCA, or the label-free pair loss.
    nu : float
        Weight of the base proxy loss inside the composite objective.
    variant : {"mini-batch", "all-class"}
        Which proxies enter the coding-rate term of the composite loss.
    base : {"proxy-anchor", "proxy-nca"}
        Base proxy loss inside the composite objective.
    epsilon : float
        Coding-rate precision.
    alpha, delta : float
        Proxy-anchor scaling and margin.
    lr : float
        Gradient-descent learning rate for the embedding rows.
    proxy_lr_multiplier : float
        Learning-rate multiplier applied to proxy updates.
    epochs, eval_every : int
        Number of training epochs and trace cadence.
    classes_per_batch, samples_per_class : int
        PK batch composition.
    seed : int
        Seed for proxy init, batch sampling, and trace clustering.

    Attributes
    ----------
    embeddings_ : ndarray of shape (n, d)
        Optimized unit-norm training embeddings.
    proxies_ : ndarray of shape (m, d)
        Optimized unit-norm proxies, one per class seen in ``fit``.
    classes_ : ndarray of shape (m,)
        Class ids in proxy row order.
    trace_ : TrainTrace
        Per-evaluation training history.
    """

    def __init__(
        self,
        loss: str = "antico",
        nu: float = 0.0035,
        variant: str = "mini-batch",
        base: str = "proxy-anchor",
        epsilon: float = 0.5,
        alpha: float = 32.0,
        delta: float = 0.1,
        lr: float = 1e-2,
        proxy_lr_multiplier: float = 100.0,
        epochs: int = 100,
        eval_every: int = 10,
        classes_per_batch: int = 30,
        samples_per_class: int = 3,
        seed: int = 0,
    ):
        self.loss = loss
        self.nu = nu
        self.variant = variant
        self.base = base
        self.epsilon = epsilon
        self.alpha = alpha
        self.delta = delta
        self.lr = lr
        self.proxy_lr_multiplier = proxy_lr_multiplier
        self.epochs = epochs
        self.eval_every = eval_every
        self.classes_per_batch = classes_per_batch
        self.samples_per_class = samples_per_class
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        rate = RateParams(self.epsilon)
        anchor = ProxyAnchorParams(alpha=self.alpha, delta=self.delta)
        return TrainConfig(
            loss=self.loss,
            antico=AntiCollapseConfig(
                nu=self.nu, rate=rate, variant=self.variant, base=self.base, anchor=anchor
            ),
            anchor=anchor,
            rate=rate,
            lr=self.lr,
            proxy_lr_multiplier=self.proxy_lr_multiplier,
            epochs=self.epochs,
            plan=BatchPlan(self.classes_per_batch, self.samples_per_class),
            eval_every=self.eval_every,
            seed=self.seed,
        )

    def fit(self, X, y):
        """Optimize embeddings and proxies on ``(X, y)``; rows are unit-projected first."""
        X = check_matrix(X, "X")
        y = check_labels(y, X.shape[0], "y")
        batch = EmbeddingBatch.from_unnormalized(X, y)
        state, trace = train(self._train_config(), batch)
        self.embeddings_ = state.embeddings.features
        self.proxies_ = state.proxies.proxies
        self.classes_ = state.proxies.class_ids
        self.trace_ = trace
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Class of the most similar proxy for each row of ``X``."""
        if not hasattr(self, "proxies_"):
            raise RuntimeError("fit must be called before predict")
        X = check_matrix(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        sims = normalize_rows(X, "X") @ self.proxies_.T
        return self.classes_[np.argmax(sims, axis=1)]
