"""Synthetic heterogeneous graph data.

Generation runs in three phases: an unweighted backbone graph, BFS node
typing driven by the relation schema, and Gibbs sampling of node signals
from the graph-conditioned Gaussian.  Ground-truth relation embeddings
are constructed with a controlled overlap between the active signal
dimensions of relation pairs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Tuple, Union

import networkx as nx
import numpy as np

from .types import (GraphValidationError, HeteroGraph, InfeasibleTargetError,
                    NodeTypeSet, RelationSchema)
from .validation import check_embeddings, check_signals, normalize_rows


@dataclass(frozen=True)
class SbmParams:
    """Stochastic block model backbone: blocks with intra/inter edge probabilities."""
    sizes: Tuple[int, ...]
    p_intra: float
    p_inter: float

    def __post_init__(self):
        if any(s < 1 for s in self.sizes):
            raise GraphValidationError("block sizes must be positive")
        for p in (self.p_intra, self.p_inter):
            if not (0.0 <= p <= 1.0):
                raise GraphValidationError(f"probability {p} outside [0, 1]")

    @property
    def n_nodes(self) -> int:
        return sum(self.sizes)


@dataclass(frozen=True)
class WattsStrogatzParams:
    """Ring lattice where each node links to its 2k nearest neighbours, rewired."""
    n: int
    k: int
    rewire: float

    def __post_init__(self):
        if self.k < 1:
            raise GraphValidationError("ring parameter k must be >= 1")
        if not (0.0 <= self.rewire <= 1.0):
            raise GraphValidationError(f"rewiring probability {self.rewire} outside [0, 1]")
        if self.n <= 2 * self.k:
            raise GraphValidationError("need n > 2k for a Watts-Strogatz ring")

    @property
    def n_nodes(self) -> int:
        return self.n


BackboneParams = Union[SbmParams, WattsStrogatzParams]


@dataclass(frozen=True)
class DGPConfig:
    """Parameters of the signal-generating Gibbs measure.

    ``sigma`` is the Gibbs temperature, ``nu`` the node-wise potential
    strength that makes the per-dimension precision ``(2/sigma)(L_k + nu I)``
    nonsingular.  Ground-truth edge weights are uniform on
    ``[weight_low, weight_high]``.
    """
    sigma: float = 2.0
    nu: float = 0.01
    weight_low: float = 1.0
    weight_high: float = 2.0

    def __post_init__(self):
        if self.sigma <= 0 or self.nu <= 0:
            raise GraphValidationError("sigma and nu must be positive")
        if not (0 < self.weight_low <= self.weight_high):
            raise GraphValidationError("need 0 < weight_low <= weight_high")


def _int_seed(seed) -> int:
    ss = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    return int(ss.generate_state(1)[0])


def generate_backbone(params: BackboneParams, seed) -> nx.Graph:
    """Sample a simple undirected backbone graph, deterministic per seed."""
    seed = _int_seed(seed)
    if isinstance(params, WattsStrogatzParams):
        return nx.watts_strogatz_graph(params.n, 2 * params.k, params.rewire,
                                       seed=seed)
    if isinstance(params, SbmParams):
        b = len(params.sizes)
        probs = np.full((b, b), params.p_inter)
        np.fill_diagonal(probs, params.p_intra)
        return nx.stochastic_block_model(list(params.sizes), probs.tolist(),
                                         seed=seed)
    raise GraphValidationError(f"unknown backbone parameter type {type(params)!r}")


def assign_types(backbone: nx.Graph, schema: RelationSchema, seed):
    """Type nodes by BFS and assign a relation to every compatible edge.

    BFS starts at the lowest-index node of each connected component.  A
    visited node draws its type uniformly from the types compatible with
    its BFS parent's type (roots draw uniformly from all types); an edge
    whose endpoint-type pair admits no relation is dropped.

    Returns
    -------
    (node_types, edge_relations, n_dropped)
        ``edge_relations`` maps each kept backbone edge ``(u, v)`` with
        ``u < v`` to a relation name.
    """
    if schema.n_relations == 0:
        raise GraphValidationError("schema declares no relations")
    names = schema.node_types.names
    participating = {a for r in schema.relations for a in schema.endpoints[r]}
    idle = set(names) - participating
    if idle:
        warnings.warn(f"node types {sorted(idle)} participate in no relation",
                      stacklevel=2)
    rng = np.random.default_rng(seed)
    n = backbone.number_of_nodes()
    types: list[Optional[str]] = [None] * n
    compatible = {a: tuple(b for b in names if schema.relations_between(a, b))
                  for a in names}
    for root in range(n):
        if types[root] is not None:
            continue
        types[root] = names[rng.integers(len(names))]
        queue = [root]
        while queue:
            node = queue.pop(0)
            for nb in sorted(backbone.neighbors(node)):
                if types[nb] is not None:
                    continue
                options = compatible[types[node]] or names
                types[nb] = options[rng.integers(len(options))]
                queue.append(nb)
    edge_relations = {}
    dropped = 0
    for (u, v) in sorted(tuple(sorted(e)) for e in backbone.edges()):
        rels = schema.relations_between(types[u], types[v])
        if not rels:
            dropped += 1
            continue
        edge_relations[(u, v)] = rels[rng.integers(len(rels))]
    return tuple(types), edge_relations, dropped


def make_embeddings_with_sdor(n_relations: int, n_dims: int, active_dims: int,
                              targets: Mapping[Tuple[int, int], float] | None,
                              seed, magnitude: Tuple[float, float] = (0.5, 1.5)):
    """Construct ground-truth embeddings with controlled support overlap.

    Every relation gets exactly ``active_dims`` strictly positive entries
    (uniform magnitudes, then row-normalized).  For each constrained
    relation pair with target overlap ratio ``t``, the two supports share
    ``s = round(t * 2M / (1 + t))`` dimensions, which makes
    ``s / (2M - s)`` the closest achievable ratio.

    Returns
    -------
    (embeddings, achieved)
        ``achieved`` maps each constrained pair to its realized ratio.
    """
    K, M = int(n_dims), int(active_dims)
    if not (1 <= M <= K):
        raise InfeasibleTargetError(f"need 1 <= active_dims <= {K}, got {M}")
    targets = dict(targets or {})
    seen: set[int] = set()
    for (i, j), t in targets.items():
        if i == j or not (0 <= i < n_relations and 0 <= j < n_relations):
            raise InfeasibleTargetError(f"invalid relation pair ({i}, {j})")
        if not (0.0 <= t <= 1.0):
            raise InfeasibleTargetError(f"overlap target {t} outside [0, 1]")
        if i in seen or j in seen:
            raise InfeasibleTargetError(
                "a relation appears in more than one constrained pair; "
                "joint support targets over >2 relations are not supported")
        seen.update((i, j))
    rng = np.random.default_rng(seed)
    supports: dict[int, np.ndarray] = {}
    achieved: dict[Tuple[int, int], float] = {}
    for (i, j), t in sorted(targets.items()):
        s = int(round(t * 2 * M / (1.0 + t)))
        union = 2 * M - s
        if union > K:
            raise InfeasibleTargetError(
                f"supports of size {M} with {s} shared dims need {union} > {K} dims")
        dims = rng.choice(K, size=union, replace=False)
        shared = dims[:s]
        supports[i] = np.sort(np.concatenate([shared, dims[s:M]]))
        supports[j] = np.sort(np.concatenate([shared, dims[M:]]))
        achieved[(i, j)] = s / (2 * M - s) if (2 * M - s) else 1.0
    for r in range(n_relations):
        if r not in supports:
            supports[r] = np.sort(rng.choice(K, size=M, replace=False))
    E = np.zeros((n_relations, K))
    for r in range(n_relations):
        E[r, supports[r]] = rng.uniform(magnitude[0], magnitude[1], size=M)
    return normalize_rows(E), achieved


def _per_dim_laplacians(graph: HeteroGraph, E: np.ndarray) -> np.ndarray:
    """Stack of (K, N, N) Laplacians with edge weights ``w * e_{r,k}^2``."""
    N, K = graph.n_nodes, E.shape[1]
    us, vs, codes, ws = graph.edge_arrays()
    L = np.zeros((K, N, N))
    scale = ws[:, None] * (E ** 2)[codes]  # (n_edges, K)
    for i in range(len(ws)):
        u, v, s = us[i], vs[i], scale[i]
        L[:, u, u] += s
        L[:, v, v] += s
        L[:, u, v] -= s
        L[:, v, u] -= s
    return L


def sample_signals(graph: HeteroGraph, embeddings: np.ndarray,
                   config: DGPConfig, seed) -> np.ndarray:
    """Draw node signals from the graph-conditioned Gaussian.

    The measure factorizes over signal dimensions: column ``k`` is a
    zero-mean Gaussian with precision ``(2/sigma) (L_k + nu I)`` where
    ``L_k`` is the graph Laplacian reweighted by ``w * e_{r,k}^2``.
    Sampling is by Cholesky factorization of the precision, deterministic
    per seed.
    """
    E = check_embeddings(embeddings, n_relations=graph.schema.n_relations)
    N, K = graph.n_nodes, E.shape[1]
    lam = (2.0 / config.sigma) * (_per_dim_laplacians(graph, E)
                                  + config.nu * np.eye(N))
    chol = np.linalg.cholesky(lam)  # lam = C C^T with C lower triangular
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((K, N, 1))
    # x = C^{-T} z has covariance (C C^T)^{-1} = lam^{-1}
    X = np.linalg.solve(np.transpose(chol, (0, 2, 1)), Z)[:, :, 0]
    return np.ascontiguousarray(X.T)


def energy(graph: HeteroGraph, embeddings: np.ndarray, X: np.ndarray,
           nu: float) -> float:
    """Signal energy: sum over edges of ``w * ||e_r o (x_u - x_v)||^2``
    plus ``nu * ||X||_F^2``.

    Equals the quadratic form ``sum_k x_k^T (L_k + nu I) x_k``.
    """
    E = check_embeddings(embeddings, n_relations=graph.schema.n_relations)
    X = check_signals(X, n_nodes=graph.n_nodes)
    if X.shape[1] != E.shape[1]:
        raise GraphValidationError(
            f"signals have {X.shape[1]} dims, embeddings {E.shape[1]}")
    us, vs, codes, ws = graph.edge_arrays()
    total = nu * float(np.sum(X * X))
    if len(ws):
        diff2 = (X[us] - X[vs]) ** 2
        total += float(np.sum(ws * np.sum(diff2 * (E ** 2)[codes], axis=1)))
    return total


@dataclass(frozen=True)
class SynthesisSpec:
    """Everything needed to synthesize one ground-truth instance."""
    backbone: BackboneParams
    schema: RelationSchema
    n_dims: int
    active_dims: int
    sdor_targets: Optional[Mapping[Tuple[int, int], float]] = None
    dgp: DGPConfig = field(default_factory=DGPConfig)
    magnitude: Tuple[float, float] = (0.5, 1.5)


@dataclass(frozen=True)
class GroundTruth:
    """A synthesized instance: graph, embeddings, signals, and provenance."""
    graph: HeteroGraph
    embeddings: Optional[np.ndarray]
    signals: np.ndarray
    achieved_sdor: Mapping[Tuple[int, int], float]
    dropped_edges: int
    spec: Optional[SynthesisSpec]
    seed: int


def synthesize(spec: SynthesisSpec, seed: int) -> GroundTruth:
    """Run the full generation pipeline, deterministic per seed."""
    ss = np.random.SeedSequence(seed)
    s_backbone, s_types, s_emb, s_weights, s_signals = ss.spawn(5)
    backbone = generate_backbone(spec.backbone, s_backbone)
    node_types, edge_relations, dropped = assign_types(backbone, spec.schema,
                                                       s_types)
    E, achieved = make_embeddings_with_sdor(
        spec.schema.n_relations, spec.n_dims, spec.active_dims,
        spec.sdor_targets, s_emb, magnitude=spec.magnitude)
    rng_w = np.random.default_rng(s_weights)
    pairs = sorted(edge_relations)
    weights = rng_w.uniform(spec.dgp.weight_low, spec.dgp.weight_high,
                            size=len(pairs))
    edges = tuple((u, v, edge_relations[(u, v)], float(w))
                  for (u, v), w in zip(pairs, weights))
    graph = HeteroGraph(spec.schema, node_types, edges)
    X = sample_signals(graph, E, spec.dgp, s_signals)
    return GroundTruth(graph, E, X, achieved, dropped, spec, seed)


def synthesize_labeled(schema: RelationSchema,
                       nodes_per_type: Mapping[str, int],
                       connectivity: Mapping[str, np.ndarray],
                       edges_per_node: float,
                       n_dims: int, active_dims: int, seed: int,
                       dgp: DGPConfig = DGPConfig(),
                       sdor_targets=None,
                       emission_strength: float = 0.0) -> GroundTruth:
    """Synthesize a labeled instance whose edges follow class-pair probabilities.

    Node labels are drawn uniformly within each type; each admissible
    pair picks one admissible relation uniformly and is wired with
    probability proportional to the relation's connectivity-matrix entry
    for the endpoint classes.  The wiring scale is set so the expected
    edge count is ``edges_per_node * N / 2``.

    With a positive ``emission_strength`` the signals additionally carry
    a label emission: each class of each node type gets a Gaussian
    prototype vector, scaled by the strength, added to the
    graph-conditioned sample.  Edges between unlike classes then carry
    little signal smoothness, which is what makes low-homophily wirings
    hard to recover.
    """
    ss = np.random.SeedSequence(seed)
    s_struct, s_emb, s_signals, s_proto = ss.spawn(4)
    rng = np.random.default_rng(s_struct)
    node_types = []
    for t in schema.node_types.names:
        node_types.extend([t] * int(nodes_per_type.get(t, 0)))
    n = len(node_types)
    labels = tuple(int(rng.integers(schema.node_types.class_counts[t]))
                   for t in node_types)
    proposals = []
    raw = []
    for u in range(n):
        for v in range(u + 1, n):
            rels = schema.relations_between(node_types[u], node_types[v])
            if not rels:
                continue
            r = rels[rng.integers(len(rels))]
            a, _ = schema.endpoints[r]
            B = np.asarray(connectivity[r], dtype=float)
            cu, cv = labels[u], labels[v]
            p = B[cu, cv] if node_types[u] == a else B[cv, cu]
            proposals.append((u, v, r))
            raw.append(p)
    raw = np.asarray(raw)
    if raw.sum() <= 0:
        raise GraphValidationError("connectivity matrices admit no edges")
    scale = (edges_per_node * n / 2.0) / raw.sum()
    keep = rng.random(len(raw)) < np.minimum(1.0, scale * raw)
    weights = rng.uniform(dgp.weight_low, dgp.weight_high, size=len(raw))
    edges = tuple((u, v, r, float(w))
                  for (u, v, r), k, w in zip(proposals, keep, weights) if k)
    graph = HeteroGraph(schema, tuple(node_types), edges, labels=labels)
    E, achieved = make_embeddings_with_sdor(
        schema.n_relations, n_dims, active_dims, sdor_targets, s_emb)
    X = sample_signals(graph, E, dgp, s_signals)
    if emission_strength > 0:
        rng_p = np.random.default_rng(s_proto)
        prototypes = {t: rng_p.standard_normal(
            (schema.node_types.class_counts[t], n_dims)) * emission_strength
            for t in schema.node_types.names}
        X = X + np.stack([prototypes[t][c]
                          for t, c in zip(node_types, labels)])
    return GroundTruth(graph, E, X, achieved, 0, None, seed)
