"""Scikit-learn style estimator around the alternating solver."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .candidates import tensor_from_weights
from .solver import SolverConfig, fit, fit_homogeneous
from .types import HeteroGraph, RelationSchema


class HeterogeneousGraphLearner(BaseEstimator):
    """Learn a typed graph structure from node signals.

    ``fit`` takes the (N, K) signal matrix ``X``; the relation schema and
    per-node types describe the admissible edge types.  Without a schema
    the learner falls back to the single-relation homogeneous form over
    all node pairs.

    Attributes set by ``fit``: ``weights_`` (candidate-edge weights),
    ``embeddings_`` (per-relation dimension weights), ``candidates_``,
    and ``result_`` with the full convergence diagnostics.
    """

    def __init__(self, schema: Optional[RelationSchema] = None,
                 alpha: float = 1.0, beta: float = 0.1,
                 update: str = "ir", reweight_scale: float = 1.0,
                 reweight_shift: float = 0.0, max_outer: int = 20,
                 outer_tol: float = 1e-4, pds_max_iter: int = 20000,
                 pds_tol: float = 1e-5, fidelity: str = "quadratic",
                 seed: int = 0):
        self.schema = schema
        self.alpha = alpha
        self.beta = beta
        self.update = update
        self.reweight_scale = reweight_scale
        self.reweight_shift = reweight_shift
        self.max_outer = max_outer
        self.outer_tol = outer_tol
        self.pds_max_iter = pds_max_iter
        self.pds_tol = pds_tol
        self.fidelity = fidelity
        self.seed = seed

    def _config(self) -> SolverConfig:
        return SolverConfig(alpha=self.alpha, beta=self.beta, update=self.update,
                            reweight_scale=self.reweight_scale,
                            reweight_shift=self.reweight_shift,
                            max_outer=self.max_outer, outer_tol=self.outer_tol,
                            pds_max_iter=self.pds_max_iter, pds_tol=self.pds_tol,
                            fidelity=self.fidelity, seed=self.seed)

    def fit(self, X, y=None, *, node_types: Optional[Sequence[str]] = None):
        X = np.asarray(X, dtype=float)
        if self.schema is None:
            result = fit_homogeneous(X, self._config())
        else:
            if node_types is None:
                if len(self.schema.node_types.names) != 1:
                    raise ValueError(
                        "node_types is required for a multi-type schema")
                node_types = (self.schema.node_types.names[0],) * X.shape[0]
            result = fit(X, node_types, self.schema, self._config())
        self.result_ = result
        self.weights_ = result.weights
        self.embeddings_ = result.embeddings
        self.candidates_ = result.candidates
        return self

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise NotFittedError("call fit before using the learned graph")

    def predict_graph(self, threshold: float = 0.0) -> HeteroGraph:
        """Extract the learned graph, resolving pair-relation conflicts."""
        self._check_fitted()
        graph, _ = tensor_from_weights(self.candidates_, self.weights_, threshold)
        return graph

    def score_candidates(self) -> np.ndarray:
        """Learned weight per candidate slot (the ranking surface)."""
        self._check_fitted()
        return self.weights_.copy()
