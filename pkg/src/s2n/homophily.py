"""Label-agreement statistics over labeled graphs.

Edge homophily is the fraction of directed edges whose endpoints agree in
label; node homophily averages each node's same-label neighbor fraction.
The multi-label variants replace equality with the Jaccard similarity of
the two endpoint label sets, and reduce to the single-label values when
every label set is a singleton.

Nodes without neighbors are excluded from node-homophily means (the
per-node term divides by the neighbor count); the exclusion count is
reported alongside the statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabelSet, SubgraphDataset, density
from .exceptions import (
    AllNodesIsolatedError,
    NoEdgesError,
    ShapeMismatchError,
    WrongLabelKindError,
)
from .translate import S2NGraph

__all__ = [
    "LabeledGraphView",
    "StatsRow",
    "edge_homophily",
    "node_homophily",
    "edge_homophily_ml",
    "node_homophily_ml",
    "dataset_stats",
]


@dataclass(eq=False)
class LabeledGraphView:
    """Binary symmetric adjacency plus node-aligned labels."""

    adjacency: np.ndarray
    labels: LabelSet

    def __post_init__(self):
        self.adjacency = np.asarray(self.adjacency)
        m = self.adjacency.shape[0]
        if self.adjacency.ndim != 2 or self.adjacency.shape[1] != m:
            raise ShapeMismatchError("adjacency must be square")
        if len(self.labels) != m:
            raise ShapeMismatchError(
                f"{len(self.labels)} labels for {m} nodes"
            )

    @classmethod
    def from_s2n(cls, s2n: S2NGraph, labels: LabelSet) -> "LabeledGraphView":
        """View of a coarse graph with labels carried over from the source
        subgraph list via ``origin_index``."""
        aligned = [labels.labels[int(j)] for j in s2n.origin_index]
        return cls(
            adjacency=s2n.adjacency,
            labels=LabelSet(kind=labels.kind, num_classes=labels.num_classes, labels=aligned),
        )

    def directed_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Both orientations of every undirected edge, row-major order."""
        return np.nonzero(self.adjacency)


def _edge_scores(view: LabeledGraphView, jaccard: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows, cols = view.directed_edges()
    if not jaccard:
        y = view.labels.single_array()
        scores = (y[rows] == y[cols]).astype(np.float64)
    else:
        sets = view.labels.label_sets()
        scores = np.empty(len(rows), dtype=np.float64)
        for k in range(len(rows)):
            a, b = sets[rows[k]], sets[cols[k]]
            union = len(a | b)
            scores[k] = len(a & b) / union if union else 0.0
    return rows, cols, scores


def _edge_mean(view: LabeledGraphView, jaccard: bool) -> float:
    rows, _, scores = _edge_scores(view, jaccard)
    if len(rows) == 0:
        raise NoEdgesError("graph has no edges")
    return float(scores.mean())


def _node_mean(view: LabeledGraphView, jaccard: bool) -> tuple[float, int]:
    m = view.adjacency.shape[0]
    rows, _, scores = _edge_scores(view, jaccard)
    deg = np.bincount(rows, minlength=m).astype(np.float64)
    isolated = int(np.sum(deg == 0))
    if isolated == m:
        raise AllNodesIsolatedError("no node has a neighbor")
    per_node = np.bincount(rows, weights=scores, minlength=m)
    keep = deg > 0
    return float(np.mean(per_node[keep] / deg[keep])), isolated


def edge_homophily(view: LabeledGraphView) -> float:
    """Fraction of directed edges whose endpoints share the same class."""
    if view.labels.kind != "single":
        raise WrongLabelKindError("edge_homophily needs single-label nodes")
    return _edge_mean(view, jaccard=False)


def node_homophily(view: LabeledGraphView) -> float:
    """Mean over non-isolated nodes of the same-class neighbor fraction."""
    if view.labels.kind != "single":
        raise WrongLabelKindError("node_homophily needs single-label nodes")
    return _node_mean(view, jaccard=False)[0]


def edge_homophily_ml(view: LabeledGraphView) -> float:
    """Mean Jaccard similarity of endpoint label sets over directed edges.

    Works on any label kind; single-class labels behave as singleton sets.
    Two empty sets score 0.
    """
    return _edge_mean(view, jaccard=True)


def node_homophily_ml(view: LabeledGraphView) -> float:
    """Mean over non-isolated nodes of the mean neighbor label-set Jaccard."""
    return _node_mean(view, jaccard=True)[0]


@dataclass
class StatsRow:
    """One row of the before/after coarsening comparison table."""

    num_nodes: int
    num_edges: int
    density: float
    num_classes: int
    node_homophily: float | None = None
    edge_homophily: float | None = None
    isolated_excluded: int | None = None


def dataset_stats(dataset: SubgraphDataset, s2n: S2NGraph) -> tuple[StatsRow, StatsRow]:
    """Size, density, and homophily before and after coarsening.

    Homophily only exists at the coarse level (original nodes carry no
    class labels), so the before row leaves it unset. The coarse graph must
    cover every subgraph of the dataset.
    """
    g = dataset.graph
    before = StatsRow(
        num_nodes=g.num_nodes,
        num_edges=g.num_undirected_edges,
        density=density(g.num_nodes, g.num_undirected_edges),
        num_classes=dataset.labels.num_classes,
    )

    view = LabeledGraphView.from_s2n(s2n, dataset.labels)
    multi = dataset.labels.kind == "multi"
    try:
        node_h, isolated = _node_mean(view, jaccard=multi)
    except AllNodesIsolatedError:
        node_h, isolated = None, s2n.num_nodes
    try:
        edge_h = _edge_mean(view, jaccard=multi)
    except NoEdgesError:
        edge_h = None
    after = StatsRow(
        num_nodes=s2n.num_nodes,
        num_edges=s2n.num_undirected_edges(),
        density=density(s2n.num_nodes, s2n.num_undirected_edges()),
        num_classes=dataset.labels.num_classes,
        node_homophily=node_h,
        edge_homophily=edge_h,
        isolated_excluded=isolated,
    )
    return before, after
