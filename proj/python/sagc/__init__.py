"""Space access graph featurization and node classification."""

from ._sagc import (
    EDGE_FEATURE_DIM,
    NODE_FEATURE_DIM,
    NUM_CLASSES,
    Checkpoint,
    SagcError,
    betweenness_centrality,
    class_names,
    closeness_centrality,
    clustering_coefficient,
    degree_centrality,
    edge_betweenness,
    featurize,
    node_degree,
    pagerank,
    run_cli,
    synth_graph,
    validate,
)

__all__ = [
    "EDGE_FEATURE_DIM",
    "NODE_FEATURE_DIM",
    "NUM_CLASSES",
    "Checkpoint",
    "SagcError",
    "betweenness_centrality",
    "class_names",
    "closeness_centrality",
    "clustering_coefficient",
    "degree_centrality",
    "edge_betweenness",
    "featurize",
    "node_degree",
    "pagerank",
    "run_cli",
    "synth_graph",
    "validate",
]
