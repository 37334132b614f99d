"""Graph storage, symmetric adjacency normalization and the sparse propagation kernel."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph in CSR form with dense node features and multi-hot labels.

    Each undirected edge is stored as two arcs. Column indices are sorted within
    every row and no row contains duplicates or a self-loop.
    """

    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        n = self.features.shape[0]
        indptr, indices = self.indptr, self.indices
        if self.features.ndim != 2 or self.labels.ndim != 2:
            raise ValueError("features and labels must be 2-d")
        if self.labels.shape[0] != n:
            raise ValueError(f"labels have {self.labels.shape[0]} rows, features have {n}")
        if indptr.shape != (n + 1,) or indptr[0] != 0 or np.any(np.diff(indptr) < 0):
            raise ValueError("row offsets must be non-decreasing from 0 with N+1 entries")
        if indptr[-1] != indices.size:
            raise ValueError("last row offset must equal the number of stored arcs")
        if indices.size and (indices.min() < 0 or indices.max() >= n):
            raise ValueError("column index out of range")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be binary")
        rows = np.repeat(np.arange(n), np.diff(indptr))
        if indices.size:
            same_row = rows[1:] == rows[:-1]
            if np.any(indices[1:][same_row] <= indices[:-1][same_row]):
                raise ValueError("column indices must be strictly increasing within a row")
            if np.any(rows == indices):
                raise ValueError("self-loops are not stored in the adjacency")
            a = sp.csr_matrix((np.ones(indices.size), indices, indptr), shape=(n, n))
            if (a != a.T).nnz:
                raise ValueError("adjacency must be symmetric")
        for arr in (indptr, indices, self.features, self.labels):
            arr.flags.writeable = False

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_arcs(self) -> int:
        return int(self.indices.size)

    @property
    def num_edges(self) -> int:
        return self.num_arcs // 2

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_labels(self) -> int:
        return self.labels.shape[1]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def stats(self) -> dict:
        return {
            "num_nodes": self.num_nodes,
            "num_edges": self.num_edges,
            "num_features": self.num_features,
            "num_labels": self.num_labels,
        }

    def to_dense_adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        rows = np.repeat(np.arange(self.num_nodes), self.degrees())
        a[rows, self.indices] = 1.0
        return a

    @classmethod
    def from_edges(cls, num_nodes: int, edges, features, labels) -> "Graph":
        """Build a graph from an iterable/array of (src, dst) pairs.

        Edges are symmetrized and deduplicated; self-loops are dropped since
        normalization adds the canonical one.
        """
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
            raise ValueError(f"edge endpoint out of range [0, {num_nodes})")
        edges = edges[edges[:, 0] != edges[:, 1]]
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        a = sp.csr_matrix((np.ones(src.size), (src, dst)), shape=(num_nodes, num_nodes))
        a.sum_duplicates()
        a.sort_indices()
        return cls(
            indptr=a.indptr.astype(np.int64),
            indices=a.indices.astype(np.int64),
            features=np.array(features, dtype=np.float64).reshape(num_nodes, -1),
            labels=np.array(labels, dtype=np.int8).reshape(num_nodes, -1),
        )

    def permuted(self, perm: np.ndarray) -> "Graph":
        """Relabel nodes so that new node i is old node perm[i]."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(perm.size)
        rows = np.repeat(np.arange(self.num_nodes), self.degrees())
        edges = np.stack([inv[rows], inv[self.indices]], axis=1)
        return Graph.from_edges(self.num_nodes, edges, self.features[perm], self.labels[perm])


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """D^-1/2 (A + I) D^-1/2 in CSR form with sorted column indices."""

    indptr: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return self.indptr.size - 1

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def normalize_adjacency(graph: Graph) -> NormalizedAdjacency:
    n = graph.num_nodes
    a = sp.csr_matrix(
        (np.ones(graph.num_arcs), graph.indices, graph.indptr), shape=(n, n)
    ) + sp.identity(n, format="csr")
    a = sp.csr_matrix(a)
    a.sort_indices()
    deg = graph.degrees() + 1.0
    rows = np.repeat(np.arange(n), np.diff(a.indptr))
    values = 1.0 / np.sqrt(deg[rows] * deg[a.indices])
    m = sp.csr_matrix((values, a.indices, a.indptr), shape=(n, n))
    for arr in (m.indptr, m.indices, m.data):
        arr.flags.writeable = False
    return NormalizedAdjacency(m.indptr, m.indices, m.data, m)


def spmm(adj: NormalizedAdjacency, dense: np.ndarray) -> np.ndarray:
    """Sparse-dense product. Row-wise accumulation order is fixed by the CSR layout."""
    if dense.ndim != 2 or dense.shape[0] != adj.num_nodes:
        raise ValueError(
            f"spmm: dense operand has shape {dense.shape}, expected ({adj.num_nodes}, h)"
        )
    return np.asarray(adj.matrix @ dense)
