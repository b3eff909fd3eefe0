"""Input validation helpers shared by the solver, generator, and metrics."""

from __future__ import annotations

import numpy as np

from .types import GraphValidationError


def check_signals(X, n_nodes: int | None = None) -> np.ndarray:
    """Validate an (N, K) signal matrix: 2-D, finite, optionally N rows."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise GraphValidationError(f"signal matrix must be 2-D, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise GraphValidationError("signal matrix contains non-finite entries")
    if n_nodes is not None and X.shape[0] != n_nodes:
        raise GraphValidationError(
            f"signal matrix has {X.shape[0]} rows but the graph has {n_nodes} nodes")
    return X


def check_embeddings(E, n_relations: int | None = None,
                     n_dims: int | None = None) -> np.ndarray:
    """Validate an (R, K) nonnegative relation-embedding matrix."""
    E = np.asarray(E, dtype=float)
    if E.ndim != 2:
        raise GraphValidationError(f"embeddings must be 2-D, got shape {E.shape}")
    if not np.isfinite(E).all():
        raise GraphValidationError("embeddings contain non-finite entries")
    if (E < 0).any():
        raise GraphValidationError("embeddings must be nonnegative")
    if n_relations is not None and E.shape[0] != n_relations:
        raise GraphValidationError(
            f"embeddings have {E.shape[0]} rows for {n_relations} relations")
    if n_dims is not None and E.shape[1] != n_dims:
        raise GraphValidationError(
            f"embeddings have {E.shape[1]} columns for {n_dims} signal dimensions")
    return E


def check_weights(w, size: int | None = None) -> np.ndarray:
    """Validate a nonnegative candidate-edge weight vector."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise GraphValidationError(f"weight vector must be 1-D, got shape {w.shape}")
    if size is not None and w.shape[0] != size:
        raise GraphValidationError(
            f"weight vector has length {w.shape[0]}, expected {size}")
    if not np.isfinite(w).all():
        raise GraphValidationError("weight vector contains non-finite entries")
    if (w < 0).any():
        raise GraphValidationError("weight vector contains negative entries")
    return w


def check_onehot(y) -> np.ndarray:
    """Validate a single one-hot label vector."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise GraphValidationError("labels must be one-hot vectors")
    if not np.all((y == 0) | (y == 1)) or int(y.sum()) != 1:
        raise GraphValidationError(f"label vector {y} is not one-hot")
    return y


def check_connectivity(B, shape: tuple[int, int] | None = None,
                       tol: float = 1e-8) -> np.ndarray:
    """Validate a class-pair connectivity matrix: nonnegative, entries sum to 1."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise GraphValidationError("connectivity matrix must be 2-D")
    if (B < 0).any():
        raise GraphValidationError("connectivity matrix has negative entries")
    if abs(B.sum() - 1.0) > tol:
        raise GraphValidationError(
            f"connectivity matrix entries sum to {B.sum():g}, expected 1")
    if shape is not None and B.shape != tuple(shape):
        raise GraphValidationError(
            f"connectivity matrix has shape {B.shape}, expected {tuple(shape)}")
    return B


def normalize_rows(E: np.ndarray) -> np.ndarray:
    """Clamp negatives to zero, replace all-zero rows by uniform, unit-normalize.

    This is the shared normalization convention for relation embeddings: it is
    applied after every embedding update and before embedding comparisons.
    """
    E = np.maximum(np.asarray(E, dtype=float), 0.0)
    K = E.shape[1]
    zero_rows = ~E.any(axis=1)
    if zero_rows.any():
        E = E.copy()
        E[zero_rows] = 1.0 / K
    norms = np.linalg.norm(E, axis=1, keepdims=True)
    return E / norms
