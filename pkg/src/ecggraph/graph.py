"""Feature-correlation graph: Pearson matrix, thresholded adjacency, edge list."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

N_NODES = 20


def zero_variance_columns(X: np.ndarray) -> tuple[int, ...]:
    X = np.asarray(X, dtype=np.float64)
    return tuple(int(i) for i in np.flatnonzero(np.all(X == X[0], axis=0)))


def pearson_matrix(X: np.ndarray) -> np.ndarray:
    """Pearson correlation between the columns of ``X`` (rows are samples).

    The result is exactly symmetric with a unit diagonal.  Zero-variance
    columns get zero off-diagonal correlation.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a 2-D matrix with at least two rows")
    Xc = X - X.mean(axis=0)
    const = np.zeros(X.shape[1], dtype=bool)
    const[list(zero_variance_columns(X))] = True
    sd = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    sd[const] = 1.0
    Z = Xc / sd
    Z[:, const] = 0.0
    corr = Z.T @ Z
    corr = 0.5 * (corr + corr.T)
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)
    return corr


def threshold_adjacency(corr: np.ndarray, threshold: float = 0.9, absolute: bool = False) -> np.ndarray:
    c = np.abs(corr) if absolute else np.asarray(corr)
    return (c >= threshold).astype(np.int64)


def to_edge_index(adjacency: np.ndarray) -> list[tuple[int, int]]:
    """Ordered (source, target) pairs of every nonzero entry, lexicographic."""
    return [(int(i), int(j)) for i, j in np.argwhere(np.asarray(adjacency) == 1)]


@dataclass(frozen=True)
class GraphSpec:
    corr: np.ndarray
    adjacency: np.ndarray
    edge_index: tuple[tuple[int, int], ...]
    threshold: float = 0.9
    absolute: bool = False
    source: str = "train"
    n_rows: int = 0
    flagged: tuple[int, ...] = ()

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    def mean_aggregator(self) -> np.ndarray:
        """Row-normalized neighbour matrix without self-loops (zero rows for isolated nodes)."""
        a = self.adjacency.astype(np.float64).copy()
        np.fill_diagonal(a, 0.0)
        deg = a.sum(axis=1, keepdims=True)
        return np.divide(a, deg, out=np.zeros_like(a), where=deg > 0)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "absolute": self.absolute,
            "source": self.source,
            "n_rows": self.n_rows,
            "flagged": list(self.flagged),
            "corr": self.corr.tolist(),
            "adjacency": self.adjacency.tolist(),
            "edge_index": [list(e) for e in self.edge_index],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "GraphSpec":
        d = json.loads(text)
        adj = np.array(d["adjacency"], dtype=np.int64)
        edges = tuple(tuple(e) for e in d["edge_index"])
        if list(edges) != to_edge_index(adj):
            raise ValueError("edge_index does not match adjacency")
        return cls(np.array(d["corr"], dtype=np.float64), adj, edges, d["threshold"],
                   d.get("absolute", False), d.get("source", "train"), d.get("n_rows", 0),
                   tuple(d.get("flagged", ())))

    def digest(self) -> str:
        payload = json.dumps({"threshold": self.threshold, "absolute": self.absolute,
                              "adjacency": self.adjacency.tolist()}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


def build_graph_spec(X_train: np.ndarray, threshold: float = 0.9, absolute: bool = False) -> GraphSpec:
    corr = pearson_matrix(X_train)
    adj = threshold_adjacency(corr, threshold, absolute)
    return GraphSpec(corr, adj, tuple(to_edge_index(adj)), threshold, absolute, "train",
                     int(np.asarray(X_train).shape[0]), zero_variance_columns(X_train))


@dataclass(frozen=True)
class GraphDataset:
    """Every beat as a 20-node graph over one shared topology."""

    node_features: np.ndarray  # (n, 20, 1)
    labels: np.ndarray
    graph: GraphSpec

    def __len__(self):
        return self.node_features.shape[0]

    @property
    def edge_index(self):
        return self.graph.edge_index


def build_graph_samples(features: np.ndarray, labels, graph_spec: GraphSpec) -> GraphDataset:
    X = np.asarray(features, dtype=np.float64)
    if X.shape[1] != graph_spec.n_nodes:
        raise ValueError(f"expected {graph_spec.n_nodes} features per beat, got {X.shape[1]}")
    return GraphDataset(X[:, :, None], np.asarray(labels), graph_spec)
