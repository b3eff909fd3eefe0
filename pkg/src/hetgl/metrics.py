"""Evaluation metrics for recovered heterogeneous graphs.

Covers edge-type AUC (with "no edge" as its own class), normalized
tensor distance for weight recovery, embedding NRMSE, homophily ratios
(direct and meta-path relaxed), and the smoothest-dimension overlap
ratio between relation types.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Tuple

import numpy as np
from scipy.stats import rankdata

from .candidates import CandidateEdgeSet, enumerate_candidates, vectorize_graph
from .solver import dimension_smoothness
from .types import GraphValidationError, HeteroGraph, SchemaError
from .validation import check_connectivity, check_weights, normalize_rows


def rank_auc(scores, positive) -> float:
    """One-vs-rest AUC via tied ranks; ties get 0.5 credit."""
    scores = np.asarray(scores, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise GraphValidationError("AUC needs at least one positive and one negative")
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0)
                 / (n_pos * n_neg))


@dataclass(frozen=True)
class AucReport:
    macro: float
    per_class: Mapping[str, float]
    skipped: Tuple[str, ...]


def auc_edge_type(truth: HeteroGraph, predicted, candidates: CandidateEdgeSet) -> AucReport:
    """Edge-type identification AUC with "no edge" as an extra class.

    Each relation class scores its own candidate slots with the predicted
    weight; the no-edge class scores each node pair with minus the
    largest predicted weight across that pair's slots.  Classes lacking a
    positive or a negative are skipped and reported.  The macro value
    averages the remaining classes.
    """
    w = check_weights(predicted, candidates.size)
    pair_rel = {(u, v): r for (u, v, r, _) in truth.edges}
    for (u, v), r in pair_rel.items():
        if (u, v, r) not in candidates.position:
            raise GraphValidationError(
                f"truth edge ({u}, {v}, {r!r}) is outside the candidate set")
    per_class = {}
    skipped = []
    for r in candidates.schema.relations:
        slots = candidates.relation_slots[r]
        if slots.size == 0:
            skipped.append(r)
            continue
        positive = np.array([pair_rel.get((u, v)) == r
                             for (u, v, r_) in (candidates.triples[i] for i in slots)])
        if positive.all() or not positive.any():
            skipped.append(r)
            continue
        per_class[r] = rank_auc(w[slots], positive)
    pairs = sorted(candidates.pair_slots)
    no_edge_scores = np.array([-w[candidates.pair_slots[p]].max() for p in pairs])
    no_edge_pos = np.array([p not in pair_rel for p in pairs])
    if no_edge_pos.any() and not no_edge_pos.all():
        per_class["no-edge"] = rank_auc(no_edge_scores, no_edge_pos)
    else:
        skipped.append("no-edge")
    if not per_class:
        raise GraphValidationError("no class has both positives and negatives")
    macro = float(np.mean(list(per_class.values())))
    return AucReport(macro, per_class, tuple(skipped))


def gmse(truth, predicted) -> float:
    """Squared distance between unit-Frobenius-normalized weight tensors.

    Both candidate-space weight vectors are scaled to unit norm first, so
    the value is invariant to positive rescaling of either side.
    """
    t = check_weights(truth)
    p = check_weights(predicted, t.size)
    tn = np.linalg.norm(t)
    if tn == 0:
        raise GraphValidationError("true weight tensor is all-zero")
    pn = np.linalg.norm(p)
    p = p / pn if pn > 0 else p
    return float(np.sum((p - t / tn) ** 2))


def gmse_true_edges(truth, predicted, n_nodes: int, n_relations: int) -> float:
    """Per-entry relative squared error, restricted to true edges.

    The literal per-entry form divides by the squared true weight, which
    is undefined on empty slots; this variant evaluates it only where the
    truth is nonzero, normalized by the full tensor size
    ``n_nodes * n_nodes * n_relations``.
    """
    t = check_weights(truth)
    p = check_weights(predicted, t.size)
    mask = t > 0
    if not mask.any():
        raise GraphValidationError("true weight tensor is all-zero")
    per_entry = (p[mask] - t[mask]) ** 2 / t[mask] ** 2
    return float(per_entry.sum() / (n_nodes * n_nodes * n_relations))


@dataclass(frozen=True)
class NrmseReport:
    value: float
    skipped_rows: Tuple[int, ...]


def nrmse_embeddings(truth, estimated) -> NrmseReport:
    """Range-normalized embedding error, averaged over relations.

    Both sides pass through the row normalization convention first.  Rows
    whose true range is zero are skipped and reported.  Per row the value
    is ``sqrt(sum_k (e_k - est_k)^2) / K / (max(e) - min(e))``.
    """
    E = normalize_rows(np.asarray(truth, dtype=float))
    F = np.asarray(estimated, dtype=float)
    if F.shape != E.shape:
        raise GraphValidationError(
            f"estimated embeddings have shape {F.shape}, expected {E.shape}")
    F = normalize_rows(F)
    K = E.shape[1]
    vals = []
    skipped = []
    for r in range(E.shape[0]):
        spread = E[r].max() - E[r].min()
        if spread == 0:
            skipped.append(r)
            continue
        vals.append(np.sqrt(np.sum((E[r] - F[r]) ** 2)) / K / spread)
    if not vals:
        raise GraphValidationError("every true embedding row is constant")
    return NrmseReport(float(np.mean(vals)), tuple(skipped))


@dataclass(frozen=True)
class HomophilyReport:
    ratio: float
    condition: bool
    dominant: Tuple[int, int]


def homophily_ratio(B) -> HomophilyReport:
    """Dominant-entry homophily ratio of a connectivity matrix.

    The dominant entry ``(p*, q*)`` is the argmax (ties broken by the
    smallest index pair); the denominator sums the entries whose row and
    column both differ from the dominant ones.  Also reports whether the
    dominant entry strictly exceeds that sum, the sufficient condition
    for the weight step to have a meaningful optimum.
    """
    B = check_connectivity(B)
    p_star, q_star = np.unravel_index(int(np.argmax(B)), B.shape)
    rows = np.arange(B.shape[0]) != p_star
    cols = np.arange(B.shape[1]) != q_star
    denom = float(B[np.ix_(rows, cols)].sum())
    top = float(B[p_star, q_star])
    ratio = np.inf if denom == 0 else top / denom
    condition = (top - denom) > 0
    return HomophilyReport(float(ratio), bool(condition), (int(p_star), int(q_star)))


@dataclass(frozen=True)
class MetaPath:
    """Typed path template with matching endpoint node types."""

    node_types: Tuple[str, ...]
    relations: Tuple[str, ...]

    def validate(self, schema) -> None:
        if len(self.node_types) != len(self.relations) + 1 or not self.relations:
            raise SchemaError("a meta-path alternates L node types with L-1 relations")
        if self.node_types[0] != self.node_types[-1]:
            raise SchemaError("meta-path endpoints must share a node type")
        for a, b, r in zip(self.node_types, self.node_types[1:], self.relations):
            if r not in schema.relations_between(a, b):
                raise SchemaError(
                    f"step ({a!r}, {b!r}, {r!r}) is not schema-admissible")


def relaxed_homophily_ratio(graph: HeteroGraph,
                            meta_path: MetaPath) -> Optional[float]:
    """Label agreement across meta-path-induced node pairs.

    All simple paths matching the template are enumerated by staged
    traversal; the induced pair set is deduplicated and pairs with equal
    endpoints are excluded.  Returns ``None`` when no pair is induced.
    """
    meta_path.validate(graph.schema)
    if graph.labels is None:
        raise GraphValidationError("relaxed homophily ratio needs node labels")
    adjacency: dict[str, dict[int, list[int]]] = {r: {} for r in graph.schema.relations}
    for (u, v, r, _) in graph.edges:
        adjacency[r].setdefault(u, []).append(v)
        adjacency[r].setdefault(v, []).append(u)
    types = graph.node_types
    starts = [i for i in range(graph.n_nodes) if types[i] == meta_path.node_types[0]]
    pairs: set[Tuple[int, int]] = set()

    def extend(path: list[int], stage: int):
        if stage == len(meta_path.relations):
            end = path[-1]
            if end != path[0]:
                pairs.add((min(path[0], end), max(path[0], end)))
            return
        want_type = meta_path.node_types[stage + 1]
        for nb in adjacency[meta_path.relations[stage]].get(path[-1], ()):
            if types[nb] == want_type and nb not in path:
                extend(path + [nb], stage + 1)

    for s in starts:
        extend([s], 0)
    if not pairs:
        return None
    same = sum(1 for (a, b) in pairs if graph.labels[a] == graph.labels[b])
    return same / len(pairs)


def smoothest_dim_overlap(X, graph_or_weights, relation: str, relation_other: str,
                          n_top: int,
                          candidates: CandidateEdgeSet | None = None) -> Optional[float]:
    """Jaccard overlap of the two relations' smoothest signal dimensions.

    Per relation, dimension-wise smoothness sums the weighted squared
    signal differences over that relation's edges; the ``n_top``
    dimensions with the smallest values (ties broken by dimension index)
    form each relation's set.  Returns ``None`` when either relation has
    zero total weight.
    """
    if isinstance(graph_or_weights, HeteroGraph):
        graph = graph_or_weights
        candidates = enumerate_candidates(graph.node_types, graph.schema)
        w = vectorize_graph(graph, candidates)
    else:
        if candidates is None:
            raise GraphValidationError(
                "a candidate set is required with a raw weight vector")
        w = check_weights(graph_or_weights, candidates.size)
    K = np.asarray(X).shape[1]
    if not (1 <= n_top <= K):
        raise GraphValidationError(f"need 1 <= n_top <= {K}, got {n_top}")
    A = dimension_smoothness(w, X, candidates)
    sets = []
    for r in (relation, relation_other):
        code = candidates.schema.relation_index(r)
        if w[candidates.relation_slots[r]].sum() == 0:
            return None
        order = np.argsort(A[code], kind="stable")
        sets.append(frozenset(order[:n_top].tolist()))
    inter = len(sets[0] & sets[1])
    union = len(sets[0] | sets[1])
    return inter / union


def default_overlap_m(n_dims: int, active_dims: int | None = None) -> int:
    """Set size for the overlap metric: the true active-dimension count
    when known, otherwise a tenth of the signal dimension, rounded up."""
    if active_dims is not None:
        return int(active_dims)
    return int(np.ceil(n_dims / 10))


@dataclass(frozen=True)
class EvalReport:
    """Metric values for one fitted graph, with provenance."""

    metrics: Mapping[str, float]
    per_class_auc: Mapping[str, float]
    seed: int
    config: Mapping
    notes: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "metrics": dict(self.metrics),
            "per_class_auc": dict(self.per_class_auc),
            "seed": self.seed,
            "config": dict(self.config),
            "notes": list(self.notes),
        }
