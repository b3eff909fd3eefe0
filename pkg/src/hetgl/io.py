"""Text file formats for datasets and results.

All files are UTF-8 text: ``nodes.csv`` (``id,type[,label]``),
``edges.csv`` (``u,v,relation,weight``), ``features.csv``
(``id,f0,...,f{K-1}``), ``schema.json`` (node types with class counts
and relations with endpoint pairs), plus result files
``learned_edges.csv`` (edge schema with a ``score`` column over all
candidates above threshold), ``embeddings.csv`` and ``metrics.json``.
Loaders validate the structural invariants and address errors by row.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from .candidates import CandidateEdgeSet
from .types import (GraphValidationError, HeteroGraph, NodeTypeSet,
                    RelationSchema)


@dataclass(frozen=True)
class Dataset:
    """In-memory view of a dataset directory."""

    schema: RelationSchema
    ids: Tuple[str, ...]
    node_types: Tuple[str, ...]
    labels: Optional[Tuple[int, ...]]
    signals: Optional[np.ndarray]
    graph: Optional[HeteroGraph]


def _fmt(x: float) -> str:
    return repr(float(x))


def load_schema(path) -> RelationSchema:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        counts = {str(k): int(v) for k, v in raw["node_types"].items()}
        relations = {str(k): (str(v[0]), str(v[1]))
                     for k, v in raw["relations"].items()}
    except (KeyError, TypeError, IndexError) as exc:
        raise GraphValidationError(f"{path}: malformed schema ({exc})") from exc
    nts = NodeTypeSet(tuple(counts), counts)
    return RelationSchema(nts, tuple(relations), relations)


def save_schema(path, schema: RelationSchema) -> None:
    payload = {
        "node_types": {t: schema.node_types.class_counts[t]
                       for t in schema.node_types.names},
        "relations": {r: list(schema.endpoints[r]) for r in schema.relations},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_nodes(path, schema: RelationSchema):
    """Returns (ids, node_types, labels-or-None)."""
    ids, types, labels = [], [], []
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["id", "type"]:
            raise GraphValidationError(f"{path}: header must start with 'id,type'")
        has_label = len(header) > 2 and header[2] == "label"
        for row_no, row in enumerate(reader, start=2):
            if len(row) < 2 + has_label:
                raise GraphValidationError(f"{path} row {row_no}: expected "
                                           f"{2 + has_label} fields, got {len(row)}")
            node_id, node_type = row[0], row[1]
            if node_id in ids:
                raise GraphValidationError(
                    f"{path} row {row_no}: duplicate node id {node_id!r}")
            if node_type not in schema.node_types:
                raise GraphValidationError(
                    f"{path} row {row_no}: unknown node type {node_type!r}")
            ids.append(node_id)
            types.append(node_type)
            if has_label:
                try:
                    labels.append(int(row[2]))
                except ValueError:
                    raise GraphValidationError(
                        f"{path} row {row_no}: label {row[2]!r} is not an integer"
                    ) from None
    return tuple(ids), tuple(types), (tuple(labels) if labels else None)


def load_features(path, ids: Sequence[str]) -> np.ndarray:
    index = {node_id: i for i, node_id in enumerate(ids)}
    X = None
    seen = 0
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "id":
            raise GraphValidationError(f"{path}: header must start with 'id'")
        k = len(header) - 1
        X = np.full((len(ids), k), np.nan)
        for row_no, row in enumerate(reader, start=2):
            if len(row) != k + 1:
                raise GraphValidationError(
                    f"{path} row {row_no}: expected {k + 1} fields, got {len(row)}")
            if row[0] not in index:
                raise GraphValidationError(
                    f"{path} row {row_no}: unknown node id {row[0]!r}")
            try:
                X[index[row[0]]] = [float(x) for x in row[1:]]
            except ValueError:
                raise GraphValidationError(
                    f"{path} row {row_no}: non-numeric feature value") from None
            seen += 1
    if seen != len(ids):
        raise GraphValidationError(
            f"{path}: {seen} feature rows for {len(ids)} nodes")
    if not np.isfinite(X).all():
        raise GraphValidationError(f"{path}: non-finite feature values")
    return X


def load_edges(path, ids: Sequence[str], schema: RelationSchema):
    index = {node_id: i for i, node_id in enumerate(ids)}
    edges = []
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:4] != ["u", "v", "relation", "weight"]:
            raise GraphValidationError(
                f"{path}: header must be 'u,v,relation,weight'")
        for row_no, row in enumerate(reader, start=2):
            if len(row) < 4:
                raise GraphValidationError(
                    f"{path} row {row_no}: expected 4 fields, got {len(row)}")
            for node_id in (row[0], row[1]):
                if node_id not in index:
                    raise GraphValidationError(
                        f"{path} row {row_no}: unknown node id {node_id!r}")
            if row[2] not in schema.relations:
                raise GraphValidationError(
                    f"{path} row {row_no}: unknown relation {row[2]!r}")
            try:
                weight = float(row[3])
            except ValueError:
                raise GraphValidationError(
                    f"{path} row {row_no}: weight {row[3]!r} is not a number"
                ) from None
            edges.append((index[row[0]], index[row[1]], row[2], weight))
    return edges


def load_dataset(directory) -> Dataset:
    """Load a dataset directory; edges and features are optional files."""
    directory = Path(directory)
    schema = load_schema(directory / "schema.json")
    ids, types, labels = load_nodes(directory / "nodes.csv", schema)
    signals = None
    if (directory / "features.csv").exists():
        signals = load_features(directory / "features.csv", ids)
    graph = None
    if (directory / "edges.csv").exists():
        edges = load_edges(directory / "edges.csv", ids, schema)
        graph = HeteroGraph(schema, types, tuple(edges), labels=labels)
    return Dataset(schema, ids, types, labels, signals, graph)


def save_dataset(directory, graph: HeteroGraph, signals=None,
                 embeddings=None) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_schema(directory / "schema.json", graph.schema)
    with open(directory / "nodes.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if graph.labels is not None:
            writer.writerow(["id", "type", "label"])
            for i, (t, c) in enumerate(zip(graph.node_types, graph.labels)):
                writer.writerow([f"n{i}", t, c])
        else:
            writer.writerow(["id", "type"])
            for i, t in enumerate(graph.node_types):
                writer.writerow([f"n{i}", t])
    with open(directory / "edges.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "v", "relation", "weight"])
        for (u, v, r, w) in graph.edges:
            writer.writerow([f"n{u}", f"n{v}", r, _fmt(w)])
    if signals is not None:
        signals = np.asarray(signals, dtype=float)
        with open(directory / "features.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id"] + [f"f{k}" for k in range(signals.shape[1])])
            for i in range(signals.shape[0]):
                writer.writerow([f"n{i}"] + [_fmt(x) for x in signals[i]])
    if embeddings is not None:
        save_embeddings(directory / "embeddings.csv", embeddings, graph.schema)


def save_embeddings(path, embeddings, schema: RelationSchema) -> None:
    E = np.asarray(embeddings, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["relation"] + [f"f{k}" for k in range(E.shape[1])])
        for code, r in enumerate(schema.relations):
            writer.writerow([r] + [_fmt(x) for x in E[code]])


def load_embeddings(path, schema: RelationSchema) -> np.ndarray:
    rows = {}
    with open(path, encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "relation":
            raise GraphValidationError(f"{path}: header must start with 'relation'")
        for row_no, row in enumerate(reader, start=2):
            if row[0] not in schema.relations:
                raise GraphValidationError(
                    f"{path} row {row_no}: unknown relation {row[0]!r}")
            rows[row[0]] = [float(x) for x in row[1:]]
    try:
        return np.array([rows[r] for r in schema.relations], dtype=float)
    except KeyError as exc:
        raise GraphValidationError(f"{path}: missing relation {exc}") from None


def save_learned_edges(path, candidates: CandidateEdgeSet, weights,
                       threshold: float = 0.0) -> None:
    """Write every candidate whose learned weight exceeds the threshold."""
    w = np.asarray(weights, dtype=float)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["u", "v", "relation", "weight", "score"])
        for i in np.flatnonzero(w > threshold):
            u, v, r = candidates.triples[i]
            writer.writerow([f"n{u}", f"n{v}", r, _fmt(w[i]), _fmt(w[i])])


def save_metrics(path, payload: Mapping) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def save_result(directory, fit_result, eval_report=None,
                threshold: float = 0.0) -> None:
    """Write learned edges, embeddings (if any), and metrics for one fit."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_learned_edges(directory / "learned_edges.csv", fit_result.candidates,
                       fit_result.weights, threshold)
    if fit_result.embeddings is not None:
        save_embeddings(directory / "embeddings.csv", fit_result.embeddings,
                        fit_result.candidates.schema)
    if eval_report is not None:
        save_metrics(directory / "metrics.json", eval_report.to_dict())
