"""Subgraph-to-node coarsening.

Each subgraph of the global graph becomes one node of a new coarse graph;
two coarse nodes are adjacent exactly when their member sets share at least
one original node. Internal subgraph structure is deliberately ignored: a
coarse node is its member set and nothing else.

The stagewise builder supports the inductive protocol: the training graph
is built from training subgraphs only, while the evaluation graph is built
from training plus evaluation subgraphs, with training nodes kept in the
same prefix positions so parameters indexed by training node carry over.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Subgraph, SubgraphDataset
from .exceptions import EmptyInputError, EmptySplitError

__all__ = [
    "S2NGraph",
    "translate_node",
    "edge_predicate",
    "overlap_size",
    "build_s2n",
    "build_stagewise",
]


@dataclass(eq=False)
class S2NGraph:
    """Coarse graph produced by the translation.

    Nodes are ordered training-first: indices ``0..train_count-1`` are the
    training nodes (stable in their original order), the rest follow. This
    ordering is a hard contract consumed by the models.
    """

    members: list[np.ndarray]  # per-node sorted original-node-id set
    adjacency: np.ndarray  # (M, M) uint8, symmetric, zero diagonal
    train_count: int
    origin_index: np.ndarray  # coarse node -> index into the source subgraph list

    @property
    def num_nodes(self) -> int:
        return len(self.members)

    @property
    def train_mask(self) -> np.ndarray:
        mask = np.zeros(self.num_nodes, dtype=bool)
        mask[: self.train_count] = True
        return mask

    def num_undirected_edges(self) -> int:
        return int(self.adjacency.sum()) // 2

    def neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def edge_list(self) -> list[tuple[int, int]]:
        """Undirected edges as sorted (i, j) pairs with i < j."""
        iu, ju = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(iu.tolist(), ju.tolist()))


def translate_node(s: Subgraph) -> np.ndarray:
    """Coarse-node member set for one subgraph: its node ids, sorted and
    deduplicated. Internal edges never affect the result."""
    return np.unique(np.asarray(s.node_ids, dtype=np.int64))


def overlap_size(vi: np.ndarray, vj: np.ndarray) -> int:
    """|vi ∩ vj| for two sorted id arrays, via linear merge."""
    i = j = count = 0
    ni, nj = len(vi), len(vj)
    while i < ni and j < nj:
        a, b = vi[i], vj[j]
        if a == b:
            count += 1
            i += 1
            j += 1
        elif a < b:
            i += 1
        else:
            j += 1
    return count


def edge_predicate(vi: np.ndarray, vj: np.ndarray) -> int:
    """1 iff the two member sets share at least one node."""
    i = j = 0
    ni, nj = len(vi), len(vj)
    while i < ni and j < nj:
        a, b = vi[i], vj[j]
        if a == b:
            return 1
        if a < b:
            i += 1
        else:
            j += 1
    return 0


def build_s2n(subgraphs: list[Subgraph], train_flags) -> S2NGraph:
    """Coarsen a subgraph list into an S2NGraph.

    Nodes are ordered train-first (stable within each group by original
    index). Adjacency is found through an inverted index from original node
    id to the coarse nodes containing it, so only member-sharing pairs are
    ever touched; the M x M pair space is never enumerated.
    """
    if not subgraphs:
        raise EmptyInputError("no subgraphs to translate")
    train_flags = list(train_flags)
    if len(train_flags) != len(subgraphs):
        raise EmptyInputError("train_flags length must match subgraphs")

    order = [i for i, t in enumerate(train_flags) if t] + [
        i for i, t in enumerate(train_flags) if not t
    ]
    train_count = sum(1 for t in train_flags if t)
    members = [translate_node(subgraphs[i]) for i in order]

    m = len(members)
    containing: dict[int, list[int]] = {}
    for idx, ids in enumerate(members):
        for u in ids:
            containing.setdefault(int(u), []).append(idx)

    adjacency = np.zeros((m, m), dtype=np.uint8)
    for bucket in containing.values():
        if len(bucket) < 2:
            continue
        for a in range(len(bucket)):
            ia = bucket[a]
            for b in range(a + 1, len(bucket)):
                ib = bucket[b]
                adjacency[ia, ib] = 1
                adjacency[ib, ia] = 1
    np.fill_diagonal(adjacency, 0)

    return S2NGraph(
        members=members,
        adjacency=adjacency,
        train_count=train_count,
        origin_index=np.asarray(order, dtype=np.int64),
    )


def build_stagewise(
    dataset: SubgraphDataset, eval_split: str
) -> tuple[S2NGraph, S2NGraph, dict[int, int]]:
    """Build the training-stage and evaluation-stage coarse graphs.

    The training graph uses training subgraphs only. The evaluation graph
    uses training plus ``eval_split`` subgraphs; training nodes occupy the
    same prefix positions in both, and the returned alignment maps each
    training-graph node to its evaluation-graph node.
    """
    if eval_split not in ("valid", "test"):
        raise EmptySplitError(f"eval_split must be valid|test, got {eval_split!r}")
    train_idx = dataset.indices_of_split("train")
    eval_idx = dataset.indices_of_split(eval_split)
    if not train_idx:
        raise EmptySplitError("train split is empty")
    if not eval_idx:
        raise EmptySplitError(f"{eval_split} split is empty")

    train_graph = build_s2n([dataset.subgraphs[i] for i in train_idx], [True] * len(train_idx))
    train_graph.origin_index = np.asarray(
        [train_idx[p] for p in train_graph.origin_index], dtype=np.int64
    )

    combined = train_idx + eval_idx
    eval_graph = build_s2n(
        [dataset.subgraphs[i] for i in combined],
        [True] * len(train_idx) + [False] * len(eval_idx),
    )
    eval_graph.origin_index = np.asarray(
        [combined[p] for p in eval_graph.origin_index], dtype=np.int64
    )

    alignment = {i: i for i in range(train_graph.num_nodes)}
    return train_graph, eval_graph, alignment
