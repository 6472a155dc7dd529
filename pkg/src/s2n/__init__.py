"""Subgraph-to-node coarsening and the downstream classification pipeline."""

__version__ = "0.1.0"

from .data import (
    GlobalGraph,
    LabelSet,
    Subgraph,
    SubgraphDataset,
    SynthConfig,
    density,
    generate_synthetic,
    load_dataset,
    save_dataset,
    validate,
)
from .estimators import S2NClassifier, S2NTranslator
from .homophily import (
    LabeledGraphView,
    StatsRow,
    dataset_stats,
    edge_homophily,
    edge_homophily_ml,
    node_homophily,
    node_homophily_ml,
)
from .models import (
    ModelBundle,
    ModelConfig,
    TrainConfig,
    evaluate,
    micro_f1,
    param_count,
    train,
)
from .translate import (
    S2NGraph,
    build_s2n,
    build_stagewise,
    edge_predicate,
    overlap_size,
    translate_node,
)

__all__ = [
    "__version__",
    "GlobalGraph",
    "Subgraph",
    "LabelSet",
    "SubgraphDataset",
    "SynthConfig",
    "density",
    "generate_synthetic",
    "load_dataset",
    "save_dataset",
    "validate",
    "S2NGraph",
    "translate_node",
    "edge_predicate",
    "overlap_size",
    "build_s2n",
    "build_stagewise",
    "LabeledGraphView",
    "StatsRow",
    "edge_homophily",
    "node_homophily",
    "edge_homophily_ml",
    "node_homophily_ml",
    "dataset_stats",
    "TrainConfig",
    "ModelConfig",
    "ModelBundle",
    "train",
    "evaluate",
    "micro_f1",
    "param_count",
    "S2NTranslator",
    "S2NClassifier",
]
