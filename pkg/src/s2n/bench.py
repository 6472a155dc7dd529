"""Throughput and latency measurement for the training/inference pipeline.

Throughput divides the per-stage sample count by mean wall-clock time per
epoch; latency divides stage wall-clock time by the number of batches.
Training here is full batch, so batches equal epochs and every report says
so explicitly instead of assuming it.

The clock is injected: production uses the monotonic performance counter,
tests substitute a deterministic fake. One warm-up epoch runs untimed
before measurement begins (recorded in the report metadata, since the
headline protocol is simply "mean wall-clock time over the epochs").
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import models
from .data import LabelSet, SubgraphDataset
from .exceptions import ClockUnavailableError
from .models import ModelConfig, TrainBatch
from .translate import build_stagewise

__all__ = ["BenchReport", "measure"]


@dataclass
class BenchReport:
    train_throughput: float  # subgraphs / second
    infer_throughput: float  # subgraphs / second
    train_latency: float  # seconds / forward pass
    infer_latency: float  # seconds / forward pass
    param_count: int
    epochs_measured: int
    train_samples: int
    infer_samples: int
    train_batches: int
    infer_batches: int
    wall_times: dict = field(default_factory=dict)  # raw seconds per stage
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "train_throughput": self.train_throughput,
            "infer_throughput": self.infer_throughput,
            "train_latency": self.train_latency,
            "infer_latency": self.infer_latency,
            "param_count": self.param_count,
            "epochs_measured": self.epochs_measured,
            "train_samples": self.train_samples,
            "infer_samples": self.infer_samples,
            "train_batches": self.train_batches,
            "infer_batches": self.infer_batches,
            "wall_times": dict(self.wall_times),
            "metadata": dict(self.metadata),
        }


def measure(
    model_config: ModelConfig,
    dataset: SubgraphDataset,
    epochs: int = 50,
    clock=None,
) -> BenchReport:
    """Time ``epochs`` full-batch training steps and ``epochs`` inference
    passes over the validation-stage graph, then apply the throughput and
    latency formulas."""
    if epochs < 1:
        raise ClockUnavailableError("need at least one measured epoch")
    if clock is None:
        clock = time.perf_counter

    train_graph, eval_graph, _ = build_stagewise(dataset, "valid")
    bundle = models.init_model(
        feature_dim=dataset.features.shape[1],
        num_classes=dataset.labels.num_classes,
        label_kind=dataset.labels.kind,
        encoder_kind=model_config.encoder_kind,
        config=model_config.train,
        pool=model_config.pool,
        set_layers=model_config.set_layers,
        graph_layers=model_config.graph_layers,
        hidden_dim=model_config.hidden_dim,
        train_prefix=train_graph.train_count,
    )

    train_rows = np.arange(train_graph.train_count)
    train_labels = LabelSet(
        kind=dataset.labels.kind,
        num_classes=dataset.labels.num_classes,
        labels=[dataset.labels.labels[int(i)] for i in train_graph.origin_index],
    )
    if model_config.encoder_kind == "gcn":
        train_cache = models._gcn_norm(train_graph.adjacency)
        eval_cache = models._gcn_norm(eval_graph.adjacency)
    else:
        train_cache = models._masked_lists(train_graph.adjacency, train_graph.train_count)
        eval_cache = models._masked_lists(eval_graph.adjacency, eval_graph.train_count)

    def train_step(epoch: int):
        batch = TrainBatch(
            s2n=train_graph,
            features=dataset.features,
            labeled_rows=train_rows,
            labels=train_labels,
            epoch=epoch,
            training=True,
        )
        total, leaves, _ = models._loss_var(bundle, batch, caches=train_cache)
        grads = models._clip_grads(
            models.ad.backward(total, leaves), model_config.train.clip
        )
        if model_config.train.lr != 0.0:
            for arr, g in zip(bundle.param_arrays(), grads):
                arr -= model_config.train.lr * g

    def infer_pass():
        var_bundle, _ = bundle.as_vars()
        models._bundle_logits(
            var_bundle, eval_graph, dataset.features, None, eval_cache
        )

    train_step(epoch=0)  # warm-up, untimed
    infer_pass()

    t0 = clock()
    for epoch in range(1, epochs + 1):
        train_step(epoch)
    train_wall = clock() - t0

    t0 = clock()
    for _ in range(epochs):
        infer_pass()
    infer_wall = clock() - t0

    if train_wall <= 0.0 or infer_wall <= 0.0:
        raise ClockUnavailableError("clock did not advance during measurement")

    n_train = train_graph.train_count
    n_infer = eval_graph.num_nodes - eval_graph.train_count
    train_batches = epochs  # full-batch: one batch per epoch
    infer_batches = epochs

    return BenchReport(
        train_throughput=n_train / (train_wall / epochs),
        infer_throughput=n_infer / (infer_wall / epochs),
        train_latency=train_wall / train_batches,
        infer_latency=infer_wall / infer_batches,
        param_count=models.param_count(bundle),
        epochs_measured=epochs,
        train_samples=n_train,
        infer_samples=n_infer,
        train_batches=train_batches,
        infer_batches=infer_batches,
        wall_times={"train": train_wall, "infer": infer_wall},
        metadata={
            "warmup_epochs": 1,
            "warmup_note": "one untimed epoch before measurement; not part of the headline protocol",
            "batching": "full-batch; batches per stage equal epochs",
        },
    )
