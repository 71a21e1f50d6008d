"""Exact k-NN similarity graph and its Laplacian.

Neighbors are found by brute force (blocked O(n^2 d) distance computation),
ties broken toward the lower index, and the edge set symmetrized by union,
so the construction is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

_BLOCK_ROWS = 256


@dataclass
class NeighborGraph:
    """Symmetric weighted graph in CSR form (sorted column indices, no self-loops)."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    k_nn: int
    weighting: str

    def neighbors(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        """Column indices and weights of node p's incident edges."""
        lo, hi = self.indptr[p], self.indptr[p + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix(
            (self.weights, self.indices, self.indptr), shape=(self.n, self.n)
        )

    @property
    def num_edges(self) -> int:
        """Undirected edge count."""
        return self.indices.size // 2

    def validate(self) -> "NeighborGraph":
        w = self.to_scipy()
        if (abs(w - w.T) > 1e-12 * max(1.0, abs(w).max())).nnz:
            raise ValueError("adjacency is not symmetric")
        if w.diagonal().any():
            raise ValueError("adjacency has self-loops")
        if self.weights.size and (self.weights <= 0).any():
            raise ValueError("all weights must be positive")
        if not np.isfinite(self.weights).all():
            raise ValueError("weights must be finite")
        return self


@dataclass
class LaplacianView:
    """L = D - W held implicitly; supports matvec and small dense materialization."""

    graph: NeighborGraph
    degrees: np.ndarray

    @property
    def n(self) -> int:
        return self.graph.n

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.degrees * x - self.graph.to_scipy() @ x

    def dense(self) -> np.ndarray:
        lap = -self.graph.to_scipy().toarray()
        np.fill_diagonal(lap, self.degrees)
        return lap

    def quadratic_form(self, x: np.ndarray) -> float:
        """x' L x, evaluated as the weighted sum of squared edge differences."""
        g = self.graph
        p = np.repeat(np.arange(g.n), np.diff(g.indptr))
        diffs = x[p] - x[g.indices]
        return 0.5 * float(np.dot(g.weights, diffs * diffs))


def _squared_distances(block: np.ndarray, data: np.ndarray, data_sq: np.ndarray) -> np.ndarray:
    d2 = data_sq[:, None].T + (block * block).sum(axis=1)[:, None] - 2.0 * block @ data.T
    np.maximum(d2, 0.0, out=d2)
    return d2


def build_knn_graph(data, k_nn: int, weighting: str = "gaussian") -> NeighborGraph:
    """Union-symmetrized exact k-NN graph over the rows of `data`.

    `weighting` is "binary" (w = 1) or "gaussian"
    (w = exp(-dist^2 / sigma^2) with sigma^2 the mean squared distance to
    the k-th neighbor).  Distance ties are broken toward the lower index.
    """
    values = data.values if hasattr(data, "values") else np.asarray(data, dtype=np.float64)
    n = values.shape[0]
    if not 1 <= k_nn < n:
        raise ValueError(f"k_nn must satisfy 1 <= k_nn < n, got k_nn={k_nn}, n={n}")
    if weighting not in ("binary", "gaussian"):
        raise ValueError(f"unknown weighting {weighting!r}")

    data_sq = (values * values).sum(axis=1)
    neighbor_idx = np.empty((n, k_nn), dtype=np.int64)
    kth_sq_dist = np.empty(n, dtype=np.float64)

    for start in range(0, n, _BLOCK_ROWS):
        stop = min(start + _BLOCK_ROWS, n)
        d2 = _squared_distances(values[start:stop], values, data_sq)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # Candidate set keeps every point tied with the k-th distance so the
        # lower-index tie-break is exact regardless of partition order.
        kth_vals = np.partition(d2, k_nn - 1, axis=1)[:, k_nn - 1]
        for r in range(stop - start):
            cand = np.flatnonzero(d2[r] <= kth_vals[r])
            order = np.lexsort((cand, d2[r, cand]))
            neighbor_idx[start + r] = cand[order[:k_nn]]
        kth_sq_dist[start:stop] = kth_vals

    src = np.repeat(np.arange(n), k_nn)
    dst = neighbor_idx.ravel()
    # union symmetrization: keep an edge if either endpoint selected it
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    edge_keys = np.unique(lo * n + hi)
    edge_p = edge_keys // n
    edge_q = edge_keys % n

    if weighting == "binary":
        edge_w = np.ones(edge_p.size, dtype=np.float64)
    else:
        diffs = values[edge_p] - values[edge_q]
        sq = (diffs * diffs).sum(axis=1)
        sigma_sq = float(kth_sq_dist.mean())
        if sigma_sq <= 0:
            # all points coincide with their k-th neighbor
            edge_w = np.ones(edge_p.size, dtype=np.float64)
        else:
            edge_w = np.exp(-sq / sigma_sq)

    rows = np.concatenate([edge_p, edge_q])
    cols = np.concatenate([edge_q, edge_p])
    vals = np.concatenate([edge_w, edge_w])
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr)
    return NeighborGraph(n, indptr, cols, vals, k_nn, weighting)


def laplacian(graph: NeighborGraph) -> LaplacianView:
    """Degree vector plus an implicit L = D - W."""
    degrees = np.zeros(graph.n, dtype=np.float64)
    np.add.at(degrees, np.repeat(np.arange(graph.n), np.diff(graph.indptr)), graph.weights)
    return LaplacianView(graph, degrees)


def connected_components(graph: NeighborGraph) -> np.ndarray:
    """Component id per node (ids ordered by smallest member index)."""
    n_comp, comp = sp.csgraph.connected_components(graph.to_scipy(), directed=False)
    # csgraph already numbers components by first occurrence; keep that order
    return comp
