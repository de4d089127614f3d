"""Exact, approximate and heuristic modularity maximization with partition-similarity metrics."""

from .graph import (
    Graph,
    GraphError,
    ModularityParams,
    Partition,
    canonicalize,
    giant_component,
    load_edge_list,
    modularity,
    modularity_entry,
    serialize_edge_list,
)

__all__ = [
    "Graph",
    "GraphError",
    "ModularityParams",
    "Partition",
    "canonicalize",
    "giant_component",
    "load_edge_list",
    "modularity",
    "modularity_entry",
    "serialize_edge_list",
]

__version__ = "0.1.0"
