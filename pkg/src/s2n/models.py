"""Classification models for coarse graphs, in float64 reference arithmetic.

The pipeline encodes each coarse node's member-feature set with a
permutation-invariant set encoder (per-element MLP, sum or max pool,
post-pool MLP), then passes the stacked representations through a graph
encoder producing per-node logits:

* ``gcn``: symmetrically normalized message passing with self-loops.
* ``linkx_i``: an inductive variant of the LINKX family; its adjacency
  branch aggregates one learned row per *training* node, so the same
  weights serve both the training graph and the larger evaluation graph.

Training is plain full-batch gradient descent with optional global-norm
clipping. Gradients are analytic (reverse-mode, see ``autodiff``);
dropout masks come from a counter-based RNG keyed by (seed, epoch, site)
so runs are reproducible bit for bit.
"""

from __future__ import annotations

import base64
import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .data import LabelSet, SubgraphDataset
from .exceptions import (
    EmptyMemberSetError,
    InfeasibleConfigError,
    ShapeMismatchError,
)
from .translate import S2NGraph, build_stagewise

__all__ = [
    "TrainConfig",
    "ModelConfig",
    "DeepSetsParams",
    "GCNParams",
    "LINKXIParams",
    "ModelBundle",
    "TrainBatch",
    "deepsets_forward",
    "gcn_forward",
    "masked_adj_multiply",
    "linkxi_forward",
    "loss",
    "backward",
    "train",
    "evaluate",
    "predict",
    "micro_f1",
    "param_count",
    "init_model",
    "save_model",
    "load_model",
    "model_to_json",
    "model_from_json",
]

ENCODER_KINDS = ("gcn", "linkx_i")
POOL_KINDS = ("sum", "max")


@dataclass
class TrainConfig:
    """Optimizer and regularization settings.

    ``weight_decay`` is either 0 (off) or within the searched range
    [1e-9, 1e-6]; ``dropout`` and ``clip`` live in [0, 0.5] with 0 meaning
    off. ``clip`` thresholds the global gradient norm.
    """

    lr: float = 0.01
    weight_decay: float = 0.0
    dropout: float = 0.0
    clip: float = 0.0
    epochs: int = 200
    seed: int = 0

    def check(self):
        if self.lr < 0:
            raise InfeasibleConfigError("lr must be >= 0")
        if self.weight_decay != 0.0 and not (1e-9 <= self.weight_decay <= 1e-6):
            raise InfeasibleConfigError("weight_decay must be 0 or in [1e-9, 1e-6]")
        if not (0.0 <= self.dropout <= 0.5):
            raise InfeasibleConfigError("dropout must be in [0, 0.5]")
        if not (0.0 <= self.clip <= 0.5):
            raise InfeasibleConfigError("clip must be in [0, 0.5]")
        if self.epochs < 0:
            raise InfeasibleConfigError("epochs must be >= 0")


@dataclass
class ModelConfig:
    """Architecture plus training settings, as one serializable unit."""

    encoder_kind: str = "gcn"
    pool: str = "sum"
    set_layers: int = 2
    graph_layers: int = 2
    hidden_dim: int = 32
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _dense_chain(rng, dims: list[int]) -> list[list[np.ndarray]]:
    return [
        [_glorot(rng, dims[k], dims[k + 1]), np.zeros(dims[k + 1])]
        for k in range(len(dims) - 1)
    ]


@dataclass(eq=False)
class DeepSetsParams:
    """Set encoder: pre-pool MLP, sum|max pool, post-pool MLP.

    The total layer count is 2 or 4, split evenly between the two MLPs,
    with ReLU strictly between consecutive layers of each MLP.
    """

    phi_layers: list
    pool: str
    rho_layers: list

    def check(self):
        total = len(self.phi_layers) + len(self.rho_layers)
        if total not in (2, 4) or len(self.phi_layers) != len(self.rho_layers):
            raise InfeasibleConfigError("set encoder must have 2 or 4 layers, split evenly")
        if self.pool not in POOL_KINDS:
            raise InfeasibleConfigError(f"pool must be one of {POOL_KINDS}")

    def named_params(self, prefix="set"):
        for k, (w, b) in enumerate(self.phi_layers):
            yield f"{prefix}.phi{k}.W", w
            yield f"{prefix}.phi{k}.b", b
        for k, (w, b) in enumerate(self.rho_layers):
            yield f"{prefix}.rho{k}.W", w
            yield f"{prefix}.rho{k}.b", b

    def map_params(self, fn):
        return DeepSetsParams(
            phi_layers=[[fn(w), fn(b)] for w, b in self.phi_layers],
            pool=self.pool,
            rho_layers=[[fn(w), fn(b)] for w, b in self.rho_layers],
        )


@dataclass(eq=False)
class GCNParams:
    """1- or 2-layer message passing weights; layer k maps through W then bias."""

    layers: list

    def check(self):
        if len(self.layers) not in (1, 2):
            raise InfeasibleConfigError("graph encoder must have 1 or 2 layers")

    def named_params(self, prefix="enc"):
        for k, (w, b) in enumerate(self.layers):
            yield f"{prefix}.layer{k}.W", w
            yield f"{prefix}.layer{k}.b", b

    def map_params(self, fn):
        return GCNParams(layers=[[fn(w), fn(b)] for w, b in self.layers])


@dataclass(eq=False)
class LINKXIParams:
    """Inductive LINKX-style weights.

    ``adj_first`` holds one learned row per training node; the adjacency
    branch of the forward pass sums the rows of training neighbors, so its
    shape is fixed by the training graph, not the graph being scored.
    """

    adj_first: list  # [W_A (train_prefix, F), b (F,)]
    adj_rest: list  # ordinary dense layers after the masked first layer
    mlp_x: list
    combine: list  # [W_f (F, 2F), b_f (F,)]
    mlp_f: list
    train_prefix: int

    def check(self):
        if self.adj_first[0].shape[0] != self.train_prefix:
            raise ShapeMismatchError("adjacency-branch rows must equal train_prefix")

    def named_params(self, prefix="enc"):
        yield f"{prefix}.adj0.W", self.adj_first[0]
        yield f"{prefix}.adj0.b", self.adj_first[1]
        for k, (w, b) in enumerate(self.adj_rest, start=1):
            yield f"{prefix}.adj{k}.W", w
            yield f"{prefix}.adj{k}.b", b
        for k, (w, b) in enumerate(self.mlp_x):
            yield f"{prefix}.x{k}.W", w
            yield f"{prefix}.x{k}.b", b
        yield f"{prefix}.combine.W", self.combine[0]
        yield f"{prefix}.combine.b", self.combine[1]
        for k, (w, b) in enumerate(self.mlp_f):
            yield f"{prefix}.f{k}.W", w
            yield f"{prefix}.f{k}.b", b

    def map_params(self, fn):
        return LINKXIParams(
            adj_first=[fn(self.adj_first[0]), fn(self.adj_first[1])],
            adj_rest=[[fn(w), fn(b)] for w, b in self.adj_rest],
            mlp_x=[[fn(w), fn(b)] for w, b in self.mlp_x],
            combine=[fn(self.combine[0]), fn(self.combine[1])],
            mlp_f=[[fn(w), fn(b)] for w, b in self.mlp_f],
            train_prefix=self.train_prefix,
        )


@dataclass(eq=False)
class ModelBundle:
    """Everything needed to score a coarse graph: both encoders' parameters
    plus the architecture and training configuration."""

    encoder_kind: str
    set_params: DeepSetsParams
    encoder: GCNParams | LINKXIParams
    config: TrainConfig
    feature_dim: int
    hidden_dim: int
    num_classes: int
    label_kind: str

    def named_params(self):
        yield from self.set_params.named_params()
        yield from self.encoder.named_params()

    def param_names(self) -> list[str]:
        return [name for name, _ in self.named_params()]

    def param_arrays(self) -> list[np.ndarray]:
        return [arr for _, arr in self.named_params()]

    def as_vars(self):
        """Duplicate the bundle with parameters wrapped as autodiff leaves;
        returns (var_bundle, leaf list aligned with param_names())."""
        leaves = []

        def wrap(arr):
            v = ad.param(arr)
            leaves.append(v)
            return v

        var_bundle = dataclasses.replace(
            self,
            set_params=self.set_params.map_params(wrap),
            encoder=self.encoder.map_params(wrap),
        )
        return var_bundle, leaves


def init_model(
    feature_dim: int,
    num_classes: int,
    label_kind: str,
    encoder_kind: str,
    config: TrainConfig,
    pool: str = "sum",
    set_layers: int = 2,
    graph_layers: int = 2,
    hidden_dim: int = 32,
    train_prefix: int | None = None,
) -> ModelBundle:
    """Seeded parameter initialization (Glorot-uniform weights, zero biases)."""
    config.check()
    if encoder_kind not in ENCODER_KINDS:
        raise InfeasibleConfigError(f"encoder must be one of {ENCODER_KINDS}")
    if set_layers not in (2, 4):
        raise InfeasibleConfigError("set_layers must be 2 or 4")
    if graph_layers not in (1, 2):
        raise InfeasibleConfigError("graph_layers must be 1 or 2")
    rng = np.random.default_rng(config.seed)

    half = set_layers // 2
    phi_dims = [feature_dim] + [hidden_dim] * half
    rho_dims = [hidden_dim] * (half + 1)
    set_params = DeepSetsParams(
        phi_layers=_dense_chain(rng, phi_dims),
        pool=pool,
        rho_layers=_dense_chain(rng, rho_dims),
    )
    set_params.check()

    if encoder_kind == "gcn":
        dims = (
            [hidden_dim, num_classes]
            if graph_layers == 1
            else [hidden_dim, hidden_dim, num_classes]
        )
        encoder = GCNParams(layers=_dense_chain(rng, dims))
    else:
        if train_prefix is None:
            raise InfeasibleConfigError("linkx_i needs the training-node count")
        adj_first = [_glorot(rng, train_prefix, hidden_dim), np.zeros(hidden_dim)]
        adj_rest = _dense_chain(rng, [hidden_dim] * graph_layers)  # empty when depth 1
        mlp_x = _dense_chain(rng, [hidden_dim] * (graph_layers + 1))
        combine = [_glorot(rng, hidden_dim, 2 * hidden_dim), np.zeros(hidden_dim)]
        f_dims = (
            [hidden_dim, num_classes]
            if graph_layers == 1
            else [hidden_dim, hidden_dim, num_classes]
        )
        mlp_f = _dense_chain(rng, f_dims)
        encoder = LINKXIParams(
            adj_first=adj_first,
            adj_rest=adj_rest,
            mlp_x=mlp_x,
            combine=combine,
            mlp_f=mlp_f,
            train_prefix=train_prefix,
        )
    encoder.check()

    return ModelBundle(
        encoder_kind=encoder_kind,
        set_params=set_params,
        encoder=encoder,
        config=config,
        feature_dim=feature_dim,
        hidden_dim=hidden_dim,
        num_classes=num_classes,
        label_kind=label_kind,
    )


# ---------------------------------------------------------------------------
# Dropout
# ---------------------------------------------------------------------------


class DropoutPlan:
    """Inverted-dropout masks from a counter-based RNG.

    Each (seed, epoch, site) triple keys an independent Philox stream, so a
    mask is a pure function of those integers and the shape it covers.
    """

    def __init__(self, rate: float, seed: int, epoch: int, training: bool):
        self.rate = float(rate)
        self.seed = int(seed)
        self.epoch = int(epoch)
        self.training = bool(training)
        self._site = 0

    def active(self) -> bool:
        return self.training and self.rate > 0.0

    def reset(self):
        """Rewind the site counter; two forward passes bracketed by resets
        draw identical masks, which finite-difference checks rely on."""
        self._site = 0

    def next_mask(self, shape) -> np.ndarray:
        site = self._site
        self._site += 1
        key = (self.seed << 64) + (self.epoch << 32) + site
        rng = np.random.Generator(np.random.Philox(key=key))
        keep = rng.random(shape) >= self.rate
        return keep / (1.0 - self.rate)


def _maybe_dropout(h, plan: DropoutPlan | None):
    if plan is None or not plan.active():
        return h
    mask = plan.next_mask(h.value.shape if isinstance(h, ad.Var) else h.shape)
    return ad.mul(h, ad.constant(mask))


# ---------------------------------------------------------------------------
# Forward passes
# ---------------------------------------------------------------------------


def _mlp(h, layers, relu_after_last=False):
    for k, (w, b) in enumerate(layers):
        h = ad.add(ad.matmul(h, w), b)
        if relu_after_last or k < len(layers) - 1:
            h = ad.relu(h)
    return h


def _encode_sets(members: list[np.ndarray], features: np.ndarray, p: DeepSetsParams):
    for m in members:
        if len(m) == 0:
            raise EmptyMemberSetError("coarse node with no members")
    rows = np.concatenate(members)
    if rows.max() >= features.shape[0] or rows.min() < 0:
        raise ShapeMismatchError("member id outside the feature matrix")
    offsets = np.concatenate([[0], np.cumsum([len(m) for m in members])])
    h = ad.constant(features[rows])
    h = _mlp(h, p.phi_layers)
    h = ad.segment_sum(h, offsets) if p.pool == "sum" else ad.segment_max(h, offsets)
    return _mlp(h, p.rho_layers)


def deepsets_forward(members: np.ndarray, features: np.ndarray, p: DeepSetsParams) -> np.ndarray:
    """Representation of one member set; invariant to enumeration order."""
    members = np.asarray(members, dtype=np.int64)
    if members.size == 0:
        raise EmptyMemberSetError("empty member set")
    return _encode_sets([members], features, p).value[0]


def _gcn_norm(adjacency: np.ndarray) -> np.ndarray:
    """Symmetric normalization with self-loops: D^-1/2 (A + I) D^-1/2."""
    a_bar = adjacency.astype(np.float64) + np.eye(adjacency.shape[0])
    d_inv_sqrt = 1.0 / np.sqrt(a_bar.sum(axis=1))
    return a_bar * d_inv_sqrt[:, None] * d_inv_sqrt[None, :]


def _gcn_logits(h, norm_adj: np.ndarray, p: GCNParams, plan: DropoutPlan | None):
    norm = ad.constant(norm_adj)
    h = _maybe_dropout(h, plan)
    for k, (w, b) in enumerate(p.layers):
        h = ad.add(ad.matmul(ad.matmul(norm, h), w), b)
        if k < len(p.layers) - 1:
            h = ad.relu(h)
            h = _maybe_dropout(h, plan)
    return h


def gcn_forward(
    H: np.ndarray,
    adjacency: np.ndarray,
    p: GCNParams,
    dropout: DropoutPlan | None = None,
) -> np.ndarray:
    """Per-node logits from normalized message passing over the coarse graph."""
    H = np.asarray(H, dtype=np.float64)
    if H.shape[0] != adjacency.shape[0]:
        raise ShapeMismatchError(
            f"{H.shape[0]} representation rows for {adjacency.shape[0]} nodes"
        )
    if H.shape[1] != p.layers[0][0].shape[0]:
        raise ShapeMismatchError("representation width does not match first layer")
    return _gcn_logits(ad.constant(H), _gcn_norm(adjacency), p, dropout).value


def _masked_lists(adjacency: np.ndarray, train_prefix: int):
    """(forward, backward) neighbor-row lists for the masked product."""
    fwd = [np.flatnonzero(adjacency[i, :train_prefix]) for i in range(adjacency.shape[0])]
    bwd = [np.flatnonzero(adjacency[j]) for j in range(train_prefix)]
    return fwd, bwd


def masked_adj_multiply(
    adjacency: np.ndarray, w_a: np.ndarray, train_prefix: int
) -> np.ndarray:
    """Sum the W_A rows of each node's training neighbors.

    Output row i is ``sum_{j in N(i), j < train_prefix} w_a[j]``; with every
    node in the prefix this is exactly the dense adjacency product.
    """
    adjacency = np.asarray(adjacency)
    if w_a.shape[0] != train_prefix:
        raise ShapeMismatchError(
            f"w_a has {w_a.shape[0]} rows for train_prefix {train_prefix}"
        )
    if adjacency.shape[0] < train_prefix:
        raise ShapeMismatchError("graph smaller than its training prefix")
    fwd, bwd = _masked_lists(adjacency, train_prefix)
    return ad.masked_rows_matmul(fwd, ad.constant(w_a), bwd).value


def _linkxi_logits(
    h,
    adjacency: np.ndarray,
    p: LINKXIParams,
    plan: DropoutPlan | None,
    masked_lists=None,
):
    fwd, bwd = masked_lists if masked_lists is not None else _masked_lists(
        adjacency, p.train_prefix
    )
    h = _maybe_dropout(h, plan)

    h_a = ad.add(ad.masked_rows_matmul(fwd, p.adj_first[0], bwd), p.adj_first[1])
    for w, b in p.adj_rest:
        h_a = ad.relu(h_a)
        h_a = _maybe_dropout(h_a, plan)
        h_a = ad.add(ad.matmul(h_a, w), b)

    h_x = h
    for k, (w, b) in enumerate(p.mlp_x):
        h_x = ad.add(ad.matmul(h_x, w), b)
        if k < len(p.mlp_x) - 1:
            h_x = ad.relu(h_x)
            h_x = _maybe_dropout(h_x, plan)

    w_f, b_f = p.combine
    both = ad.concat_cols(h_a, h_x)
    mixed = ad.add(ad.matmul(both, ad.transpose(w_f)), b_f)
    combined = ad.relu(ad.add(ad.add(mixed, h_a), h_x))
    combined = _maybe_dropout(combined, plan)
    return _mlp(combined, p.mlp_f)


def linkxi_forward(
    H: np.ndarray,
    adjacency: np.ndarray,
    train_prefix: int,
    p: LINKXIParams,
    dropout: DropoutPlan | None = None,
) -> np.ndarray:
    """Per-node logits from the adjacency-embedding and feature branches."""
    H = np.asarray(H, dtype=np.float64)
    if train_prefix != p.train_prefix:
        raise ShapeMismatchError(
            f"graph train prefix {train_prefix} != parameter prefix {p.train_prefix}"
        )
    if H.shape[0] != adjacency.shape[0]:
        raise ShapeMismatchError(
            f"{H.shape[0]} representation rows for {adjacency.shape[0]} nodes"
        )
    return _linkxi_logits(ad.constant(H), adjacency, p, dropout).value


# ---------------------------------------------------------------------------
# Loss, gradients, training
# ---------------------------------------------------------------------------


def _data_loss(logits, labels: LabelSet):
    if labels.kind == "single":
        return ad.softmax_cross_entropy(logits, labels.single_array())
    return ad.sigmoid_bce(logits, labels.to_indicator())


def loss(logits: np.ndarray, labels: LabelSet, params, weight_decay: float) -> float:
    """Classification loss plus ``weight_decay * 0.5 * sum of squares`` of
    every parameter array. Single-label rows use softmax cross-entropy,
    multi-label rows elementwise sigmoid cross-entropy."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape[0] != len(labels):
        raise ShapeMismatchError(f"{logits.shape[0]} logit rows for {len(labels)} labels")
    if logits.shape[1] != labels.num_classes:
        raise ShapeMismatchError(
            f"{logits.shape[1]} logit columns for {labels.num_classes} classes"
        )
    total = _data_loss(ad.constant(logits), labels).value
    reg = sum(float(np.sum(p * p)) for p in params)
    return float(total + weight_decay * 0.5 * reg)


@dataclass(eq=False)
class TrainBatch:
    """One full-batch training or evaluation pass over a coarse graph."""

    s2n: S2NGraph
    features: np.ndarray
    labeled_rows: np.ndarray
    labels: LabelSet  # aligned with labeled_rows
    epoch: int = 0
    training: bool = True
    dropout_plan: DropoutPlan | None = None


def _bundle_logits(var_bundle: ModelBundle, s2n: S2NGraph, features, plan, caches=None):
    h = _encode_sets(s2n.members, features, var_bundle.set_params)
    if var_bundle.encoder_kind == "gcn":
        norm = caches if caches is not None else _gcn_norm(s2n.adjacency)
        return _gcn_logits(h, norm, var_bundle.encoder, plan)
    if s2n.train_count != var_bundle.encoder.train_prefix:
        raise ShapeMismatchError(
            f"graph train prefix {s2n.train_count} != parameter prefix "
            f"{var_bundle.encoder.train_prefix}"
        )
    return _linkxi_logits(h, s2n.adjacency, var_bundle.encoder, plan, masked_lists=caches)


def _loss_var(bundle: ModelBundle, batch: TrainBatch, caches=None):
    var_bundle, leaves = bundle.as_vars()
    plan = batch.dropout_plan
    if plan is None and batch.training and bundle.config.dropout > 0.0:
        plan = DropoutPlan(bundle.config.dropout, bundle.config.seed, batch.epoch, True)
    if plan is not None:
        plan.reset()
    logits = _bundle_logits(var_bundle, batch.s2n, batch.features, plan, caches)
    rows = np.asarray(batch.labeled_rows, dtype=np.int64)
    picked = ad.take_rows(logits, rows)
    total = _data_loss(picked, batch.labels)
    if bundle.config.weight_decay > 0.0:
        reg = None
        for leaf in leaves:
            sq = ad.sum_squares(leaf)
            reg = sq if reg is None else ad.add(reg, sq)
        total = ad.add(total, ad.scale(reg, 0.5 * bundle.config.weight_decay))
    return total, leaves, plan


def backward(bundle: ModelBundle, batch: TrainBatch) -> dict[str, np.ndarray]:
    """Analytic gradients of the batch loss for every parameter array."""
    total, leaves, _ = _loss_var(bundle, batch)
    grads = ad.backward(total, leaves)
    return dict(zip(bundle.param_names(), grads))


def _clip_grads(grads: list[np.ndarray], clip: float) -> list[np.ndarray]:
    if clip <= 0.0:
        return grads
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm <= clip or norm == 0.0:
        return grads
    factor = clip / norm
    return [g * factor for g in grads]


def predict(logits: np.ndarray, label_kind: str) -> np.ndarray:
    """Class ids (single-label, argmax) or a binary indicator matrix
    (multi-label, sigmoid threshold 0.5, i.e. logit > 0)."""
    if label_kind == "single":
        return np.argmax(logits, axis=1)
    return (logits > 0.0).astype(np.int64)


def micro_f1(pred: np.ndarray, true: np.ndarray, label_kind: str) -> float:
    """Micro-averaged F1 with counts pooled over every (row, class) decision.

    Single-label argmax prediction makes this plain accuracy. A perfect
    all-negative multi-label agreement (no positives anywhere) scores 1.
    """
    if label_kind == "single":
        if pred.shape != true.shape:
            raise ShapeMismatchError("prediction/label length mismatch")
        return float(np.mean(pred == true))
    if pred.shape != true.shape:
        raise ShapeMismatchError("prediction/label shape mismatch")
    tp = float(np.sum((pred == 1) & (true == 1)))
    fp = float(np.sum((pred == 1) & (true == 0)))
    fn = float(np.sum((pred == 0) & (true == 1)))
    denom = 2.0 * tp + fp + fn
    return 1.0 if denom == 0.0 else 2.0 * tp / denom


def _eval_truth(labels: LabelSet, rows_origin) -> np.ndarray:
    picked = [labels.labels[int(i)] for i in rows_origin]
    sub = LabelSet(kind=labels.kind, num_classes=labels.num_classes, labels=picked)
    return sub.single_array() if labels.kind == "single" else sub.to_indicator()


def _graph_micro_f1(bundle: ModelBundle, s2n: S2NGraph, features, labels: LabelSet,
                    rows: np.ndarray, caches=None) -> float:
    var_bundle, _ = bundle.as_vars()
    logits = _bundle_logits(var_bundle, s2n, features, None, caches).value[rows]
    truth = _eval_truth(labels, s2n.origin_index[rows])
    return micro_f1(predict(logits, labels.kind), truth, labels.kind)


def train(
    dataset: SubgraphDataset,
    encoder_kind: str,
    config: TrainConfig,
    pool: str = "sum",
    set_layers: int = 2,
    graph_layers: int = 2,
    hidden_dim: int = 32,
) -> tuple[ModelBundle, dict]:
    """Full-batch gradient descent on the training-stage coarse graph.

    Validation micro-F1 is tracked per epoch on the evaluation-stage graph
    (training plus validation subgraphs). Deterministic given the seed.
    """
    config.check()
    train_graph, val_graph, _ = build_stagewise(dataset, "valid")
    bundle = init_model(
        feature_dim=dataset.features.shape[1],
        num_classes=dataset.labels.num_classes,
        label_kind=dataset.labels.kind,
        encoder_kind=encoder_kind,
        config=config,
        pool=pool,
        set_layers=set_layers,
        graph_layers=graph_layers,
        hidden_dim=hidden_dim,
        train_prefix=train_graph.train_count,
    )

    train_rows = np.arange(train_graph.train_count)
    train_labels = LabelSet(
        kind=dataset.labels.kind,
        num_classes=dataset.labels.num_classes,
        labels=[dataset.labels.labels[int(i)] for i in train_graph.origin_index],
    )
    val_rows = np.arange(val_graph.train_count, val_graph.num_nodes)

    if encoder_kind == "gcn":
        train_cache = _gcn_norm(train_graph.adjacency)
        val_cache = _gcn_norm(val_graph.adjacency)
    else:
        train_cache = _masked_lists(train_graph.adjacency, train_graph.train_count)
        val_cache = _masked_lists(val_graph.adjacency, val_graph.train_count)

    history = {"loss": [], "val_micro_f1": []}
    for epoch in range(config.epochs):
        batch = TrainBatch(
            s2n=train_graph,
            features=dataset.features,
            labeled_rows=train_rows,
            labels=train_labels,
            epoch=epoch,
            training=True,
        )
        total, leaves, _ = _loss_var(bundle, batch, caches=train_cache)
        grads = ad.backward(total, leaves)
        grads = _clip_grads(grads, config.clip)
        if config.lr != 0.0:
            for arr, g in zip(bundle.param_arrays(), grads):
                arr -= config.lr * g
        history["loss"].append(float(total.value))
        history["val_micro_f1"].append(
            _graph_micro_f1(
                bundle, val_graph, dataset.features, dataset.labels, val_rows, val_cache
            )
        )
    return bundle, history


def evaluate(bundle: ModelBundle, dataset: SubgraphDataset, eval_split: str) -> float:
    """Micro-F1 on the evaluation rows of the stagewise evaluation graph."""
    _, eval_graph, _ = build_stagewise(dataset, eval_split)
    rows = np.arange(eval_graph.train_count, eval_graph.num_nodes)
    return _graph_micro_f1(bundle, eval_graph, dataset.features, dataset.labels, rows)


def param_count(bundle: ModelBundle) -> int:
    """Total scalar parameters across all weights and biases."""
    return int(sum(arr.size for arr in bundle.param_arrays()))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _encode_array(arr: np.ndarray) -> dict:
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode(),
    }


def _decode_array(obj: dict) -> np.ndarray:
    data = np.frombuffer(base64.b64decode(obj["data"]), dtype="<f8")
    return data.reshape(obj["shape"]).copy()


def model_to_json(bundle: ModelBundle) -> str:
    arch = {
        "encoder": bundle.encoder_kind,
        "pool": bundle.set_params.pool,
        "set_layers": len(bundle.set_params.phi_layers) + len(bundle.set_params.rho_layers),
        "graph_layers": (
            len(bundle.encoder.layers)
            if bundle.encoder_kind == "gcn"
            else len(bundle.encoder.adj_rest) + 1
        ),
        "hidden_dim": bundle.hidden_dim,
        "feature_dim": bundle.feature_dim,
        "num_classes": bundle.num_classes,
        "label_kind": bundle.label_kind,
        "train_prefix": (
            None if bundle.encoder_kind == "gcn" else bundle.encoder.train_prefix
        ),
    }
    payload = {
        "format": 1,
        "arch": arch,
        "config": dataclasses.asdict(bundle.config),
        "params": {name: _encode_array(arr) for name, arr in bundle.named_params()},
    }
    return json.dumps(payload, sort_keys=True, indent=1)


def model_from_json(text: str) -> ModelBundle:
    payload = json.loads(text)
    arch = payload["arch"]
    config = TrainConfig(**payload["config"])
    bundle = init_model(
        feature_dim=arch["feature_dim"],
        num_classes=arch["num_classes"],
        label_kind=arch["label_kind"],
        encoder_kind=arch["encoder"],
        config=config,
        pool=arch["pool"],
        set_layers=arch["set_layers"],
        graph_layers=arch["graph_layers"],
        hidden_dim=arch["hidden_dim"],
        train_prefix=arch["train_prefix"],
    )
    stored = payload["params"]
    for name, arr in bundle.named_params():
        decoded = _decode_array(stored[name])
        if list(decoded.shape) != list(arr.shape):
            raise ShapeMismatchError(f"stored {name} has shape {decoded.shape}")
        arr[...] = decoded
    return bundle


def save_model(bundle: ModelBundle, path) -> None:
    with open(path, "w") as fh:
        fh.write(model_to_json(bundle))
        fh.write("\n")


def load_model(path) -> ModelBundle:
    with open(path) as fh:
        return model_from_json(fh.read())
