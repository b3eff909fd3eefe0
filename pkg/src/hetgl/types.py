"""Domain types for typed graphs.

A heterogeneous graph carries a node type for every node and a relation
type on every edge.  The relation type of an edge is constrained by the
types of its endpoints through a :class:`RelationSchema`, and each
unordered node pair carries at most one relation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np


class SchemaError(ValueError):
    """A node type or relation is inconsistent with the declared schema."""


class GraphValidationError(ValueError):
    """A graph, signal, label, or weight container violates an invariant."""


class InfeasibleTargetError(ValueError):
    """A requested construction target cannot be realized exactly."""


class DivergenceError(RuntimeError):
    """An iterative solver produced non-finite iterates."""

    def __init__(self, message: str, step_size: float | None = None,
                 iteration: int | None = None):
        if step_size is not None:
            message += f" (step size {step_size:g}, iteration {iteration})"
        super().__init__(message)
        self.step_size = step_size
        self.iteration = iteration


@dataclass(frozen=True)
class NodeTypeSet:
    """The set of node types together with per-type class counts.

    Parameters
    ----------
    names : tuple of str
        Node type identifiers, unique and nonempty.
    class_counts : mapping str -> int
        Number of label classes available within each node type (>= 1).
    """

    names: Tuple[str, ...]
    class_counts: Mapping[str, int]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise SchemaError("node type identifiers must be unique")
        if any(not n for n in names):
            raise SchemaError("node type identifiers must be nonempty")
        for name in names:
            count = self.class_counts.get(name)
            if count is None:
                raise SchemaError(f"missing class count for node type {name!r}")
            if int(count) < 1:
                raise SchemaError(f"class count for {name!r} must be >= 1")
        extra = set(self.class_counts) - set(names)
        if extra:
            raise SchemaError(f"class counts listed for unknown types {sorted(extra)}")

    def __contains__(self, name: str) -> bool:
        return name in self.names


@dataclass(frozen=True)
class RelationSchema:
    """Relation types with their admissible endpoint node-type pairs.

    The declaration order of ``relations`` is significant: it fixes the
    candidate-edge ordering and all tie-breaking between relations.

    Parameters
    ----------
    node_types : NodeTypeSet
    relations : tuple of str
        Relation identifiers in declaration order.
    endpoints : mapping str -> (str, str)
        Unordered node-type pair each relation may connect.
    """

    node_types: NodeTypeSet
    relations: Tuple[str, ...]
    endpoints: Mapping[str, Tuple[str, str]]
    _cells: Mapping[frozenset, Tuple[str, ...]] = field(init=False, repr=False,
                                                        compare=False)

    def __post_init__(self):
        relations = tuple(self.relations)
        object.__setattr__(self, "relations", relations)
        if len(set(relations)) != len(relations):
            raise SchemaError("relation identifiers must be unique")
        cells: dict[frozenset, list] = {}
        for r in relations:
            if r not in self.endpoints:
                raise SchemaError(f"missing endpoint pair for relation {r!r}")
            a, b = self.endpoints[r]
            if a not in self.node_types or b not in self.node_types:
                raise SchemaError(f"relation {r!r} references unknown node type")
            cells.setdefault(frozenset((a, b)), []).append(r)
        extra = set(self.endpoints) - set(relations)
        if extra:
            raise SchemaError(f"endpoints listed for unknown relations {sorted(extra)}")
        object.__setattr__(self, "_cells",
                           {k: tuple(v) for k, v in cells.items()})

    def relations_between(self, type_a: str, type_b: str) -> Tuple[str, ...]:
        """Relations admissible between two node types, in declaration order."""
        if type_a not in self.node_types or type_b not in self.node_types:
            raise SchemaError(f"unknown node type in pair ({type_a!r}, {type_b!r})")
        return self._cells.get(frozenset((type_a, type_b)), ())

    def relation_index(self, relation: str) -> int:
        try:
            return self.relations.index(relation)
        except ValueError:
            raise SchemaError(f"unknown relation {relation!r}") from None

    @property
    def n_relations(self) -> int:
        return len(self.relations)


def single_type_schema(n_relations: int = 1, node_type: str = "node",
                       relation_names: Sequence[str] | None = None) -> RelationSchema:
    """Schema with one node type and ``n_relations`` relations on it."""
    if relation_names is None:
        relation_names = [f"rel{i}" for i in range(n_relations)]
    nts = NodeTypeSet((node_type,), {node_type: 1})
    return RelationSchema(nts, tuple(relation_names),
                          {r: (node_type, node_type) for r in relation_names})


@dataclass(frozen=True)
class HeteroGraph:
    """Undirected weighted graph with typed nodes and typed edges.

    Edges are stored as ``(u, v, relation, weight)`` with ``u < v`` and
    ``weight > 0``; each unordered pair carries at most one relation type
    and the relation must be admissible for the endpoint node types.

    Parameters
    ----------
    schema : RelationSchema
    node_types : tuple of str, length N
    edges : tuple of (int, int, str, float)
    labels : tuple of int, optional
        Per-node class index, valid within the node's type.
    """

    schema: RelationSchema
    node_types: Tuple[str, ...]
    edges: Tuple[Tuple[int, int, str, float], ...]
    labels: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        node_types = tuple(self.node_types)
        object.__setattr__(self, "node_types", node_types)
        n = len(node_types)
        for t in node_types:
            if t not in self.schema.node_types:
                raise SchemaError(f"node type {t!r} not in schema")
        canon = []
        for (u, v, r, w) in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphValidationError(f"self-loop on node {u}")
            if u > v:
                u, v = v, u
            if not (0 <= u < n and v < n):
                raise GraphValidationError(f"edge ({u}, {v}) out of range for {n} nodes")
            if not (w > 0):
                raise GraphValidationError(
                    f"edge ({u}, {v}, {r!r}) has non-positive weight {w}")
            if r not in self.schema.relations_between(node_types[u], node_types[v]):
                raise GraphValidationError(
                    f"relation {r!r} not admissible between types "
                    f"{node_types[u]!r} and {node_types[v]!r} on edge ({u}, {v})")
            canon.append((u, v, r, float(w)))
        canon.sort(key=lambda e: (e[0], e[1], self.schema.relation_index(e[2])))
        seen_triples = set()
        seen_pairs = set()
        for (u, v, r, _) in canon:
            if (u, v, r) in seen_triples:
                raise GraphValidationError(f"duplicate edge ({u}, {v}, {r!r})")
            seen_triples.add((u, v, r))
            if (u, v) in seen_pairs:
                raise GraphValidationError(
                    f"pair ({u}, {v}) carries more than one relation")
            seen_pairs.add((u, v))
        object.__setattr__(self, "edges", tuple(canon))
        if self.labels is not None:
            labels = tuple(int(c) for c in self.labels)
            if len(labels) != n:
                raise GraphValidationError(
                    f"{len(labels)} labels for {n} nodes")
            for i, c in enumerate(labels):
                limit = self.schema.node_types.class_counts[node_types[i]]
                if not (0 <= c < limit):
                    raise GraphValidationError(
                        f"label {c} out of range for node {i} of type "
                        f"{node_types[i]!r} ({limit} classes)")
            object.__setattr__(self, "labels", labels)

    @property
    def n_nodes(self) -> int:
        return len(self.node_types)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_arrays(self):
        """Edges as numpy arrays ``(us, vs, relation_codes, weights)``."""
        if not self.edges:
            z = np.zeros(0, dtype=np.int64)
            return z, z.copy(), z.copy(), np.zeros(0)
        us, vs, rs, ws = zip(*self.edges)
        codes = np.array([self.schema.relation_index(r) for r in rs], dtype=np.int64)
        return (np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64),
                codes, np.array(ws, dtype=float))

    def pair_relations(self) -> Mapping[Tuple[int, int], Tuple[str, float]]:
        """Map unordered pair -> (relation, weight)."""
        return {(u, v): (r, w) for (u, v, r, w) in self.edges}

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n_nodes)
        for (u, v, _, w) in self.edges:
            d[u] += w
            d[v] += w
        return d
