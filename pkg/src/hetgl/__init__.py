"""Heterogeneous graph structure learning from node signals."""

from .candidates import (CandidateEdgeSet, DegreeOperator, enumerate_candidates,
                         tensor_from_weights, vectorize_graph)
from .estimator import HeterogeneousGraphLearner
from .generate import (DGPConfig, GroundTruth, SbmParams, SynthesisSpec,
                       WattsStrogatzParams, assign_types, energy,
                       generate_backbone, make_embeddings_with_sdor,
                       sample_signals, synthesize, synthesize_labeled)
from .metrics import (AucReport, EvalReport, MetaPath, auc_edge_type, gmse,
                      gmse_true_edges, homophily_ratio, nrmse_embeddings,
                      rank_auc, relaxed_homophily_ratio, smoothest_dim_overlap)
from .solver import (FitResult, SolverConfig, dimension_smoothness, fit,
                     fit_from_labels, fit_homogeneous, gd_update,
                     graph_objective, graph_step, ir_update, onehot_labels,
                     smoothness_vector)
from .types import (DivergenceError, GraphValidationError, HeteroGraph,
                    InfeasibleTargetError, NodeTypeSet, RelationSchema,
                    SchemaError, single_type_schema)

__version__ = "0.1.0"

__all__ = [
    "AucReport", "CandidateEdgeSet", "DGPConfig", "DegreeOperator",
    "DivergenceError", "EvalReport", "FitResult", "GraphValidationError",
    "GroundTruth", "HeteroGraph", "HeterogeneousGraphLearner",
    "InfeasibleTargetError", "MetaPath", "NodeTypeSet", "RelationSchema",
    "SbmParams", "SchemaError", "SolverConfig", "SynthesisSpec",
    "WattsStrogatzParams", "assign_types", "auc_edge_type",
    "dimension_smoothness", "energy", "enumerate_candidates", "fit",
    "fit_from_labels", "fit_homogeneous", "gd_update", "generate_backbone",
    "gmse", "gmse_true_edges", "graph_objective", "graph_step",
    "homophily_ratio", "ir_update", "make_embeddings_with_sdor",
    "nrmse_embeddings", "onehot_labels", "rank_auc",
    "relaxed_homophily_ratio", "sample_signals", "single_type_schema",
    "smoothest_dim_overlap", "smoothness_vector", "synthesize",
    "synthesize_labeled", "tensor_from_weights", "vectorize_graph",
]
