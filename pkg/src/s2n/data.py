"""Data model, I/O, validation, and synthetic generation for subgraph datasets.

A dataset lives in a directory with this exact layout:

    meta.json       {"num_nodes": int, "num_classes": int,
                     "label_kind": "single"|"multi", "feature_dim": int}
    edges.tsv       one undirected edge per line, "u<TAB>v" with u < v,
                    lines in ascending (u, v) order, no duplicates
    subgraphs.jsonl one JSON object per line:
                    {"nodes": [ids], "label": int | [ints],
                     "split": "train"|"valid"|"test",
                     "internal_edges": [[u, v], ...]}   (last key optional)
    features.bin    optional; two little-endian u64 header words (rows, cols)
                    followed by row-major little-endian float64 data

Node ids are dense ``0..N-1``. When ``features.bin`` is absent, features
default to a 16-bucket log-degree one-hot encoding so structure-only
datasets stay runnable.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    AsymmetricEdgeListError,
    DatasetValidationError,
    DegenerateGraphError,
    DuplicateEdgeError,
    InfeasibleConfigError,
    MissingFileError,
    NodeIdOutOfRangeError,
    ParseError,
    SelfLoopRejectedError,
)

SPLITS = ("train", "valid", "test")

DEFAULT_FEATURE_BUCKETS = 16


class GlobalGraph:
    """Undirected global graph in compressed sparse row form.

    Neighbor lists are sorted ascending with no duplicates, no self-loops,
    and the structure is symmetric. Immutable after construction.
    """

    def __init__(self, num_nodes: int, indptr: np.ndarray, indices: np.ndarray):
        self.num_nodes = int(num_nodes)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.indptr.flags.writeable = False
        self.indices.flags.writeable = False

    @property
    def num_undirected_edges(self) -> int:
        return len(self.indices) // 2

    @classmethod
    def from_edges(cls, num_nodes: int, edges) -> "GlobalGraph":
        """Build from an iterable of undirected (u, v) pairs with u != v.

        Pairs may come in any orientation; each undirected edge must appear
        exactly once.
        """
        seen = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise SelfLoopRejectedError(f"self-loop at node {u}")
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise NodeIdOutOfRangeError(
                    f"edge ({u}, {v}) outside 0..{num_nodes - 1}"
                )
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise DuplicateEdgeError(f"duplicate edge {key}")
            seen.add(key)
        return cls._from_pair_set(num_nodes, seen)

    @classmethod
    def _from_pair_set(cls, num_nodes: int, pairs) -> "GlobalGraph":
        degree = np.zeros(num_nodes, dtype=np.int64)
        for u, v in pairs:
            degree[u] += 1
            degree[v] += 1
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(degree, out=indptr[1:])
        indices = np.empty(indptr[-1], dtype=np.int64)
        cursor = indptr[:-1].copy()
        for u, v in sorted(pairs):
            indices[cursor[u]] = v
            cursor[u] += 1
            indices[cursor[v]] = u
            cursor[v] += 1
        for u in range(num_nodes):
            row = indices[indptr[u] : indptr[u + 1]]
            row.sort()
        return cls(num_nodes, indptr, indices)

    @classmethod
    def from_arbitrary_ids(cls, edges) -> tuple["GlobalGraph", dict]:
        """Build from pairs with arbitrary hashable node ids.

        Ids are re-mapped to dense ``0..N-1`` in sorted order; returns the
        graph and the ``original id -> dense id`` mapping.
        """
        edges = list(edges)
        ids = sorted({x for e in edges for x in e})
        id_map = {orig: i for i, orig in enumerate(ids)}
        dense = [(id_map[u], id_map[v]) for u, v in edges]
        return cls.from_edges(len(ids), dense), id_map

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def degree(self, u: int) -> int:
        return int(self.indptr[u + 1] - self.indptr[u])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        k = np.searchsorted(row, v)
        return k < len(row) and row[k] == v

    def undirected_edges(self):
        """Yield each undirected edge once as (u, v) with u < v, ascending."""
        for u in range(self.num_nodes):
            for v in self.neighbors(u):
                if u < v:
                    yield u, int(v)


@dataclass(eq=False)
class Subgraph:
    """A labeled node subset of the global graph.

    ``node_ids`` is sorted and unique. ``internal_edges`` (optional) lists
    edges of the global graph with both endpoints inside ``node_ids``; the
    coarsening deliberately ignores them.
    """

    node_ids: np.ndarray
    internal_edges: np.ndarray | None = None

    def __post_init__(self):
        self.node_ids = np.asarray(self.node_ids, dtype=np.int64)
        if self.internal_edges is not None:
            self.internal_edges = np.asarray(
                self.internal_edges, dtype=np.int64
            ).reshape(-1, 2)


@dataclass(eq=False)
class LabelSet:
    """Per-subgraph labels, either one class id each or a set of class ids."""

    kind: str  # "single" | "multi"
    num_classes: int
    labels: list  # single: list[int]; multi: list[tuple[int, ...]] (sorted)

    def __len__(self) -> int:
        return len(self.labels)

    def label_sets(self) -> list[frozenset]:
        if self.kind == "single":
            return [frozenset((int(y),)) for y in self.labels]
        return [frozenset(ls) for ls in self.labels]

    def to_indicator(self) -> np.ndarray:
        """Binary (M, C) indicator matrix."""
        out = np.zeros((len(self.labels), self.num_classes), dtype=np.float64)
        for i, y in enumerate(self.labels):
            if self.kind == "single":
                out[i, int(y)] = 1.0
            else:
                for c in y:
                    out[i, int(c)] = 1.0
        return out

    def single_array(self) -> np.ndarray:
        if self.kind != "single":
            raise ValueError("single_array requires single-label kind")
        return np.asarray(self.labels, dtype=np.int64)


@dataclass(eq=False)
class SubgraphDataset:
    graph: GlobalGraph
    features: np.ndarray  # (N, F0) float64
    subgraphs: list[Subgraph]
    labels: LabelSet
    split: list[str]  # per-subgraph, in SPLITS

    @property
    def num_subgraphs(self) -> int:
        return len(self.subgraphs)

    def indices_of_split(self, name: str) -> list[int]:
        return [i for i, s in enumerate(self.split) if s == name]


@dataclass
class Violation:
    kind: str
    where: str
    message: str

    def __str__(self):
        return f"[{self.kind}] {self.where}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind: str, where: str, message: str):
        self.violations.append(Violation(kind, where, message))


def density(num_nodes: int, num_undirected_edges: int) -> float:
    """Fraction of node pairs joined by an edge: 2|E| / (N(N-1))."""
    if num_nodes < 2:
        raise DegenerateGraphError(f"density needs >= 2 nodes, got {num_nodes}")
    return 2.0 * num_undirected_edges / (num_nodes * (num_nodes - 1))


def degree_bucket_features(
    graph: GlobalGraph, num_buckets: int = DEFAULT_FEATURE_BUCKETS
) -> np.ndarray:
    """One-hot log2-degree bucket features, the default when none are stored."""
    out = np.zeros((graph.num_nodes, num_buckets), dtype=np.float64)
    buckets = np.minimum(
        np.floor(np.log2(graph.degrees() + 1)).astype(np.int64), num_buckets - 1
    )
    out[np.arange(graph.num_nodes), buckets] = 1.0
    return out


def validate(dataset: SubgraphDataset) -> ValidationReport:
    """Check every structural invariant; violations become report entries.

    Never raises and never mutates. An empty report means the dataset is
    well-formed.
    """
    report = ValidationReport()
    g = dataset.graph
    n = g.num_nodes

    for u in range(n):
        row = g.neighbors(u)
        if len(row) != len(np.unique(row)):
            report.add("duplicate_neighbor", f"node {u}", "neighbor list has duplicates")
        elif np.any(np.diff(row) <= 0):
            report.add("unsorted_neighbors", f"node {u}", "neighbor list not ascending")
        if np.any(row == u):
            report.add("self_loop", f"node {u}", "self-loop present")
        if len(row) and (row.min() < 0 or row.max() >= n):
            report.add("node_id_range", f"node {u}", "neighbor id outside 0..N-1")
        for v in row:
            if not g.has_edge(int(v), u):
                report.add(
                    "asymmetric_adjacency",
                    f"edge ({u}, {v})",
                    "reverse direction missing",
                )
    if g.num_undirected_edges * 2 != len(g.indices):
        report.add("edge_count", "graph", "edge count inconsistent with neighbor lists")

    feats = dataset.features
    if feats.ndim != 2:
        report.add("feature_shape", "features", f"expected 2-d, got {feats.ndim}-d")
    else:
        if feats.shape[0] != n:
            report.add(
                "feature_rows",
                "features",
                f"{feats.shape[0]} rows for {n} nodes",
            )
        if not np.all(np.isfinite(feats)):
            report.add("feature_finite", "features", "non-finite entries")

    m = len(dataset.subgraphs)
    for i, sub in enumerate(dataset.subgraphs):
        ids = sub.node_ids
        where = f"subgraph {i}"
        if len(ids) == 0:
            report.add("empty_subgraph", where, "no member nodes")
            continue
        if len(ids) != len(np.unique(ids)):
            report.add("duplicate_member", where, "duplicate node id")
        elif np.any(np.diff(ids) <= 0):
            report.add("unsorted_members", where, "node ids not ascending")
        if ids.min() < 0 or ids.max() >= n:
            report.add("node_id_range", where, "member id outside 0..N-1")
            continue
        if sub.internal_edges is not None:
            members = set(int(x) for x in ids)
            for u, v in sub.internal_edges:
                u, v = int(u), int(v)
                if u not in members or v not in members:
                    report.add(
                        "internal_edge_member",
                        where,
                        f"internal edge ({u}, {v}) endpoint outside member set",
                    )
                elif not g.has_edge(u, v):
                    report.add(
                        "internal_edge_global",
                        where,
                        f"internal edge ({u}, {v}) not in global graph",
                    )

    labels = dataset.labels
    if len(labels) != m:
        report.add("label_length", "labels", f"{len(labels)} labels for {m} subgraphs")
    c = labels.num_classes
    for i, y in enumerate(labels.labels):
        if labels.kind == "single":
            if not (0 <= int(y) < c):
                report.add("label_range", f"subgraph {i}", f"class {y} outside 0..{c - 1}")
        else:
            for cls in y:
                if not (0 <= int(cls) < c):
                    report.add(
                        "label_range", f"subgraph {i}", f"class {cls} outside 0..{c - 1}"
                    )

    if len(dataset.split) != m:
        report.add("split_length", "split", f"{len(dataset.split)} entries for {m} subgraphs")
    for i, s in enumerate(dataset.split):
        if s not in SPLITS:
            report.add("split_value", f"subgraph {i}", f"unknown split {s!r}")

    return report


# ---------------------------------------------------------------------------
# Directory I/O
# ---------------------------------------------------------------------------


def _require_file(path: Path) -> Path:
    if not path.is_file():
        raise MissingFileError(f"missing {path}")
    return path


def load_dataset(root_path) -> SubgraphDataset:
    """Load and validate a dataset directory (see module docstring for layout)."""
    root = Path(root_path)
    if not root.is_dir():
        raise MissingFileError(f"dataset directory not found: {root}")

    try:
        meta = json.loads(_require_file(root / "meta.json").read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"meta.json: {e}") from e
    for key in ("num_nodes", "num_classes", "label_kind", "feature_dim"):
        if key not in meta:
            raise ParseError(f"meta.json missing key {key!r}")
    if meta["label_kind"] not in ("single", "multi"):
        raise ParseError(f"meta.json label_kind must be single|multi, got {meta['label_kind']!r}")
    num_nodes = int(meta["num_nodes"])
    num_classes = int(meta["num_classes"])
    feature_dim = int(meta["feature_dim"])
    kind = meta["label_kind"]

    edges = []
    seen = set()
    with open(_require_file(root / "edges.tsv")) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected 'u<TAB>v'", line=lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as e:
                raise ParseError(f"non-integer node id: {line!r}", line=lineno) from e
            if u == v:
                raise SelfLoopRejectedError(f"edges.tsv line {lineno}: self-loop {u}")
            if u > v:
                raise AsymmetricEdgeListError(
                    f"edges.tsv line {lineno}: expected u < v, got ({u}, {v})"
                )
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise NodeIdOutOfRangeError(
                    f"edges.tsv line {lineno}: ({u}, {v}) outside 0..{num_nodes - 1}"
                )
            if (u, v) in seen:
                raise DuplicateEdgeError(f"edges.tsv line {lineno}: duplicate ({u}, {v})")
            seen.add((u, v))
            edges.append((u, v))
    graph = GlobalGraph._from_pair_set(num_nodes, seen)

    subgraphs = []
    raw_labels = []
    split = []
    with open(_require_file(root / "subgraphs.jsonl")) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"subgraphs.jsonl: {e}", line=lineno) from e
            for key in ("nodes", "label", "split"):
                if key not in obj:
                    raise ParseError(f"subgraphs.jsonl missing key {key!r}", line=lineno)
            nodes = np.asarray(sorted(set(int(x) for x in obj["nodes"])), dtype=np.int64)
            internal = obj.get("internal_edges")
            sub = Subgraph(nodes, None if internal is None else np.asarray(internal))
            subgraphs.append(sub)
            if kind == "single":
                if not isinstance(obj["label"], int):
                    raise ParseError("single-label dataset needs integer label", line=lineno)
                raw_labels.append(int(obj["label"]))
            else:
                if not isinstance(obj["label"], list):
                    raise ParseError("multi-label dataset needs a label list", line=lineno)
                raw_labels.append(tuple(sorted(int(c) for c in set(obj["label"]))))
            split.append(str(obj["split"]))

    features_path = root / "features.bin"
    if features_path.is_file():
        features = _read_features(features_path, num_nodes, feature_dim)
    else:
        features = degree_bucket_features(graph)

    dataset = SubgraphDataset(
        graph=graph,
        features=features,
        subgraphs=subgraphs,
        labels=LabelSet(kind=kind, num_classes=num_classes, labels=raw_labels),
        split=split,
    )
    report = validate(dataset)
    if not report.ok:
        raise DatasetValidationError(report)
    return dataset


def _read_features(path: Path, num_nodes: int, feature_dim: int) -> np.ndarray:
    blob = path.read_bytes()
    if len(blob) < 16:
        raise ParseError("features.bin shorter than its 16-byte header")
    rows, cols = struct.unpack("<QQ", blob[:16])
    expected = 16 + rows * cols * 8
    if len(blob) != expected:
        raise ParseError(
            f"features.bin holds {len(blob)} bytes, header implies {expected}"
        )
    if rows != num_nodes or cols != feature_dim:
        raise ParseError(
            f"features.bin is {rows}x{cols}, meta.json says {num_nodes}x{feature_dim}"
        )
    data = np.frombuffer(blob, dtype="<f8", offset=16).reshape(rows, cols)
    return np.ascontiguousarray(data, dtype=np.float64)


def save_dataset(dataset: SubgraphDataset, root_path) -> None:
    """Write a dataset directory; inverse of :func:`load_dataset`."""
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)

    meta = {
        "num_nodes": dataset.graph.num_nodes,
        "num_classes": dataset.labels.num_classes,
        "label_kind": dataset.labels.kind,
        "feature_dim": int(dataset.features.shape[1]),
    }
    (root / "meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n")

    with open(root / "edges.tsv", "w") as fh:
        for u, v in dataset.graph.undirected_edges():
            fh.write(f"{u}\t{v}\n")

    with open(root / "subgraphs.jsonl", "w") as fh:
        for sub, label, split in zip(dataset.subgraphs, dataset.labels.labels, dataset.split):
            obj = {
                "nodes": [int(x) for x in sub.node_ids],
                "label": int(label) if dataset.labels.kind == "single" else [int(c) for c in label],
                "split": split,
            }
            if sub.internal_edges is not None:
                obj["internal_edges"] = [[int(u), int(v)] for u, v in sub.internal_edges]
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")

    rows, cols = dataset.features.shape
    with open(root / "features.bin", "wb") as fh:
        fh.write(struct.pack("<QQ", rows, cols))
        fh.write(np.ascontiguousarray(dataset.features, dtype="<f8").tobytes())


# ---------------------------------------------------------------------------
# Synthetic datasets
# ---------------------------------------------------------------------------


@dataclass
class SynthConfig:
    """Knobs for the synthetic generator.

    Each class owns a contiguous pool of nodes. A subgraph with label set L
    draws at least a ``1 - pool_overlap`` fraction of its members from the
    pools of L; the remainder is drawn from all nodes. Node features are the
    owning pool's class mean (``separation`` on one axis) plus unit Gaussian
    noise, so ``pool_overlap = 0`` with a large separation gives a cleanly
    learnable dataset and ``pool_overlap = 1`` erases the class signal in
    the coarse structure.
    """

    num_nodes: int = 600
    num_classes: int = 4
    num_subgraphs: int = 200
    min_subgraph_size: int = 8
    max_subgraph_size: int = 16
    pool_overlap: float = 0.0
    edge_prob: float = 0.02
    feature_dim: int = 8
    separation: float = 5.0
    label_kind: str = "single"
    max_labels: int = 3
    split_fracs: tuple = (0.6, 0.2, 0.2)

    def check(self):
        if self.num_nodes < 2:
            raise InfeasibleConfigError("need at least 2 nodes")
        if self.num_classes < 2:
            raise InfeasibleConfigError("need at least 2 classes")
        if self.feature_dim < self.num_classes:
            raise InfeasibleConfigError(
                "feature_dim must be >= num_classes so class means stay orthogonal"
            )
        if not (1 <= self.min_subgraph_size <= self.max_subgraph_size <= self.num_nodes):
            raise InfeasibleConfigError("bad subgraph size range")
        if not 0.0 <= self.pool_overlap <= 1.0:
            raise InfeasibleConfigError("pool_overlap must be in [0, 1]")
        pool = self.num_nodes // self.num_classes
        if math.ceil((1.0 - self.pool_overlap) * self.max_subgraph_size) > pool:
            raise InfeasibleConfigError(
                f"subgraph size {self.max_subgraph_size} cannot fit pool of {pool}"
            )
        if self.label_kind not in ("single", "multi"):
            raise InfeasibleConfigError("label_kind must be single|multi")
        if self.label_kind == "multi" and not (1 <= self.max_labels <= self.num_classes):
            raise InfeasibleConfigError("max_labels must be in 1..num_classes")
        if abs(sum(self.split_fracs) - 1.0) > 1e-9 or len(self.split_fracs) != 3:
            raise InfeasibleConfigError("split_fracs must be three fractions summing to 1")


PRESETS = {
    "separable": SynthConfig(),
    "hard": SynthConfig(pool_overlap=0.8, separation=1.0),
    "multilabel": SynthConfig(num_classes=5, separation=3.0, label_kind="multi"),
}


def _pool_bounds(config: SynthConfig) -> list[tuple[int, int]]:
    n, c = config.num_nodes, config.num_classes
    cuts = [n * k // c for k in range(c + 1)]
    return [(cuts[k], cuts[k + 1]) for k in range(c)]


def generate_synthetic(config: SynthConfig, seed: int) -> SubgraphDataset:
    """Deterministic synthetic dataset; a pure function of (config, seed)."""
    config.check()
    rng = np.random.default_rng(seed)
    n, c, m = config.num_nodes, config.num_classes, config.num_subgraphs
    pools = _pool_bounds(config)

    iu, iv = np.triu_indices(n, k=1)
    mask = rng.random(len(iu)) < config.edge_prob
    graph = GlobalGraph._from_pair_set(
        n, set(zip(iu[mask].tolist(), iv[mask].tolist()))
    )

    means = np.zeros((c, config.feature_dim))
    for k in range(c):
        means[k, k] = config.separation
    node_class = np.searchsorted([hi for _, hi in pools], np.arange(n), side="right")
    features = means[node_class] + rng.standard_normal((n, config.feature_dim))

    subgraphs = []
    labels = []
    for i in range(m):
        primary = i % c
        if config.label_kind == "multi":
            extra = rng.integers(0, config.max_labels)
            others = [k for k in range(c) if k != primary]
            chosen = [primary] + (
                list(rng.choice(others, size=extra, replace=False)) if extra else []
            )
            label = tuple(sorted(int(k) for k in chosen))
        else:
            chosen = [primary]
            label = primary
        size = int(rng.integers(config.min_subgraph_size, config.max_subgraph_size + 1))
        n_own = math.ceil((1.0 - config.pool_overlap) * size)
        members: set[int] = set()
        for j, k in enumerate(chosen):
            share = n_own // len(chosen) + (1 if j < n_own % len(chosen) else 0)
            lo, hi = pools[k]
            take = [x for x in rng.permutation(np.arange(lo, hi)) if x not in members]
            members.update(int(x) for x in take[:share])
        if len(members) < size:
            rest = [x for x in rng.permutation(n) if x not in members]
            members.update(int(x) for x in rest[: size - len(members)])
        ids = np.asarray(sorted(members), dtype=np.int64)
        internal = [
            (u, v)
            for u in ids
            for v in graph.neighbors(int(u))
            if v > u and int(v) in members
        ]
        subgraphs.append(
            Subgraph(ids, np.asarray(internal, dtype=np.int64).reshape(-1, 2))
        )
        labels.append(label)

    split = ["test"] * m
    for k in range(c):
        idx = [i for i in range(m) if i % c == k]
        idx = [idx[j] for j in rng.permutation(len(idx))]
        n_train = int(round(config.split_fracs[0] * len(idx)))
        n_valid = int(round(config.split_fracs[1] * len(idx)))
        if len(idx) >= 3:
            n_train = max(1, min(n_train, len(idx) - 2))
            n_valid = max(1, min(n_valid, len(idx) - n_train - 1))
        else:
            n_train = max(1, n_train)
        for j, i in enumerate(idx):
            if j < n_train:
                split[i] = "train"
            elif j < n_train + n_valid:
                split[i] = "valid"
            else:
                split[i] = "test"

    return SubgraphDataset(
        graph=graph,
        features=features,
        subgraphs=subgraphs,
        labels=LabelSet(kind=config.label_kind, num_classes=c, labels=labels),
        split=split,
    )
