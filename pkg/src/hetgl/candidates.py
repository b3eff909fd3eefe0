"""Candidate-edge enumeration and the weight-to-degree linear operator.

The candidate set is the solver's coordinate system: one slot per
schema-admissible triple ``(u, v, r)`` with ``u < v``, ordered by node
pair and then by the schema's relation declaration order.  This fixes
the half-vectorization layout shared by the generator, solver, metrics,
and file formats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .types import GraphValidationError, HeteroGraph, RelationSchema, SchemaError
from .validation import check_weights


@dataclass(frozen=True)
class CandidateEdgeSet:
    """Ordered enumeration of admissible ``(u, v, relation)`` triples."""

    schema: RelationSchema
    node_types: Tuple[str, ...]
    triples: Tuple[Tuple[int, int, str], ...]
    us: np.ndarray = field(repr=False, compare=False)
    vs: np.ndarray = field(repr=False, compare=False)
    rel_codes: np.ndarray = field(repr=False, compare=False)

    @property
    def size(self) -> int:
        return len(self.triples)

    @property
    def n_nodes(self) -> int:
        return len(self.node_types)

    @cached_property
    def position(self) -> Mapping[Tuple[int, int, str], int]:
        """Triple -> flat index."""
        return {t: i for i, t in enumerate(self.triples)}

    @cached_property
    def relation_slots(self) -> Mapping[str, np.ndarray]:
        """Relation name -> positions of its candidate slots."""
        return {r: np.flatnonzero(self.rel_codes == c)
                for c, r in enumerate(self.schema.relations)}

    @cached_property
    def pair_slots(self) -> Mapping[Tuple[int, int], np.ndarray]:
        """Unordered node pair -> positions of its candidate slots."""
        out: dict[Tuple[int, int], list] = {}
        for i, (u, v, _) in enumerate(self.triples):
            out.setdefault((u, v), []).append(i)
        return {k: np.asarray(v, dtype=np.int64) for k, v in out.items()}


def enumerate_candidates(node_types: Sequence[str],
                         schema: RelationSchema) -> CandidateEdgeSet:
    """Enumerate all admissible candidate triples for a typed node set.

    Self-loops are excluded.  Raises :class:`SchemaError` if a node
    carries a type the schema does not know.
    """
    node_types = tuple(node_types)
    for t in node_types:
        if t not in schema.node_types:
            raise SchemaError(f"node type {t!r} not covered by the schema")
    n = len(node_types)
    triples = []
    for u in range(n):
        for v in range(u + 1, n):
            for r in schema.relations_between(node_types[u], node_types[v]):
                triples.append((u, v, r))
    if triples:
        us = np.array([t[0] for t in triples], dtype=np.int64)
        vs = np.array([t[1] for t in triples], dtype=np.int64)
        codes = np.array([schema.relation_index(t[2]) for t in triples],
                         dtype=np.int64)
    else:
        us = np.zeros(0, dtype=np.int64)
        vs = np.zeros(0, dtype=np.int64)
        codes = np.zeros(0, dtype=np.int64)
    return CandidateEdgeSet(schema, node_types, tuple(triples), us, vs, codes)


class DegreeOperator:
    """Linear map from candidate-edge weights to per-node degrees.

    Each candidate ``(u, v, r)`` contributes its weight to the degrees of
    both endpoints.  The operator norm is computed once by power
    iteration on the normal matrix and cached.
    """

    def __init__(self, candidates: CandidateEdgeSet):
        self.candidates = candidates
        self.n_nodes = candidates.n_nodes
        self._us = candidates.us
        self._vs = candidates.vs
        touched = np.zeros(self.n_nodes, dtype=bool)
        touched[self._us] = True
        touched[self._vs] = True
        self.covered = touched

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_nodes, self.candidates.size)

    def apply(self, w: np.ndarray) -> np.ndarray:
        """Degrees ``d`` with ``d[v] = sum of w over candidates touching v``."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.candidates.size,):
            raise GraphValidationError(
                f"weight vector has shape {w.shape}, expected "
                f"({self.candidates.size},)")
        return (np.bincount(self._us, weights=w, minlength=self.n_nodes)
                + np.bincount(self._vs, weights=w, minlength=self.n_nodes))

    def adjoint(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if d.shape != (self.n_nodes,):
            raise GraphValidationError(
                f"degree vector has shape {d.shape}, expected ({self.n_nodes},)")
        return d[self._us] + d[self._vs]

    def to_sparse(self) -> sp.csr_matrix:
        m = self.candidates.size
        rows = np.concatenate([self._us, self._vs])
        cols = np.concatenate([np.arange(m), np.arange(m)])
        data = np.ones(2 * m)
        return sp.csr_matrix((data, (rows, cols)), shape=self.shape)

    @cached_property
    def norm(self) -> float:
        """Largest singular value, by power iteration (tol 1e-9, <= 100 steps)."""
        m = self.candidates.size
        if m == 0:
            return 0.0
        v = np.full(m, 1.0 / np.sqrt(m))
        sigma = 0.0
        for _ in range(100):
            u = self.apply(v)
            v = self.adjoint(u)
            nrm = np.linalg.norm(v)
            if nrm == 0.0:
                return 0.0
            v /= nrm
            new_sigma = np.sqrt(nrm)
            if sigma > 0 and abs(new_sigma - sigma) < 1e-9 * sigma:
                return new_sigma
            sigma = new_sigma
        return sigma


def vectorize_graph(graph: HeteroGraph, candidates: CandidateEdgeSet) -> np.ndarray:
    """Half-vectorize a graph's adjacency into the candidate coordinate system."""
    w = np.zeros(candidates.size)
    pos = candidates.position
    for (u, v, r, weight) in graph.edges:
        i = pos.get((u, v, r))
        if i is None:
            raise GraphValidationError(
                f"edge ({u}, {v}, {r!r}) is not a candidate slot")
        w[i] = weight
    return w


def tensor_from_weights(candidates: CandidateEdgeSet, w: np.ndarray,
                        threshold: float = 0.0,
                        labels=None) -> Tuple[HeteroGraph, int]:
    """Extract a graph from a candidate weight vector.

    Slots with ``weight > threshold`` become edges.  When several
    relations exceed the threshold on the same node pair, only the
    largest-weight relation is kept (ties broken by the schema's relation
    declaration order) and the pair counts as one conflict.

    Returns
    -------
    (graph, n_conflicts)
    """
    w = check_weights(w, candidates.size)
    if threshold < 0:
        raise GraphValidationError("threshold must be nonnegative")
    idx = np.flatnonzero(w > threshold)
    conflicts = 0
    edges = []
    if idx.size:
        pair_ids = candidates.us[idx] * candidates.n_nodes + candidates.vs[idx]
        conflicts = int(np.count_nonzero(np.unique(pair_ids,
                                                   return_counts=True)[1] > 1))
        # sort by (pair, weight desc, declaration order) and keep one per pair
        order = np.lexsort((candidates.rel_codes[idx], -w[idx], pair_ids))
        prev_pair = -1
        for j in order:
            if pair_ids[j] == prev_pair:
                continue
            u, v, r = candidates.triples[idx[j]]
            edges.append((u, v, r, float(w[idx[j]])))
            prev_pair = pair_ids[j]
    graph = HeteroGraph(candidates.schema, candidates.node_types,
                        tuple(edges), labels=labels)
    return graph, conflicts
