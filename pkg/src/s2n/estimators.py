"""Estimator-style wrappers so the pipeline composes with scikit-learn.

``S2NTranslator`` is the coarsening step as a transformer: fit captures the
training subgraphs, transform coarsens evaluation subgraphs together with
them (training nodes keep their prefix positions). ``S2NClassifier`` wraps
the full train/evaluate pipeline with scikit-learn's parameter protocol.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import models
from .data import SubgraphDataset
from .models import TrainConfig
from .translate import S2NGraph, build_s2n

__all__ = ["S2NTranslator", "S2NClassifier"]


class S2NTranslator(BaseEstimator, TransformerMixin):
    """Coarsen subgraphs into nodes of a new graph.

    The translation itself has no hyperparameters: a coarse node is a
    member set, and two nodes are adjacent when their sets intersect.
    """

    def fit(self, X, y=None):
        """Capture the training subgraphs and build their coarse graph.

        X is a sequence of :class:`~s2n.data.Subgraph`.
        """
        self.train_subgraphs_ = list(X)
        self.train_graph_ = build_s2n(self.train_subgraphs_, [True] * len(self.train_subgraphs_))
        return self

    def transform(self, X) -> S2NGraph:
        """Coarse graph over the training subgraphs plus ``X``.

        Training nodes occupy the same prefix positions as in
        ``train_graph_``; rows from ``train_graph_.train_count`` onward
        correspond to ``X`` in order.
        """
        if not hasattr(self, "train_graph_"):
            raise NotFittedError("fit the translator before calling transform")
        extra = list(X)
        combined = self.train_subgraphs_ + extra
        flags = [True] * len(self.train_subgraphs_) + [False] * len(extra)
        return build_s2n(combined, flags)


class S2NClassifier(BaseEstimator):
    """Subgraph classifier: set encoder, coarse-graph encoder, full-batch
    gradient descent. ``fit`` consumes a :class:`SubgraphDataset` (labels
    and splits travel with it), ``predict``/``score`` run the inductive
    evaluation protocol on a chosen split.
    """

    def __init__(
        self,
        encoder: str = "gcn",
        pool: str = "sum",
        set_layers: int = 2,
        graph_layers: int = 2,
        hidden_dim: int = 32,
        lr: float = 0.01,
        weight_decay: float = 0.0,
        dropout: float = 0.0,
        clip: float = 0.0,
        epochs: int = 200,
        seed: int = 0,
    ):
        self.encoder = encoder
        self.pool = pool
        self.set_layers = set_layers
        self.graph_layers = graph_layers
        self.hidden_dim = hidden_dim
        self.lr = lr
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.clip = clip
        self.epochs = epochs
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr,
            weight_decay=self.weight_decay,
            dropout=self.dropout,
            clip=self.clip,
            epochs=self.epochs,
            seed=self.seed,
        )

    def fit(self, X: SubgraphDataset, y=None):
        self.model_, self.history_ = models.train(
            X,
            encoder_kind=self.encoder,
            config=self._train_config(),
            pool=self.pool,
            set_layers=self.set_layers,
            graph_layers=self.graph_layers,
            hidden_dim=self.hidden_dim,
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("fit the classifier before predicting")

    def predict(self, X: SubgraphDataset, split: str = "test") -> np.ndarray:
        """Predicted class ids (single-label) or indicator rows (multi-label)
        for the subgraphs of ``split``, in ``X.indices_of_split(split)`` order."""
        self._check_fitted()
        from .translate import build_stagewise

        _, eval_graph, _ = build_stagewise(X, split)
        rows = np.arange(eval_graph.train_count, eval_graph.num_nodes)
        var_bundle, _ = self.model_.as_vars()
        logits = models._bundle_logits(var_bundle, eval_graph, X.features, None).value
        return models.predict(logits[rows], self.model_.label_kind)

    def score(self, X: SubgraphDataset, y=None, split: str = "test") -> float:
        """Micro-F1 on the evaluation rows of ``split``."""
        self._check_fitted()
        return models.evaluate(self.model_, X, split)
