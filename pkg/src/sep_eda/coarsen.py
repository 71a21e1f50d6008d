"""Spectrum-preserving graph compression.

Gauss-Seidel relaxation on L x = 0 smooths random test vectors toward the
bottom of the Laplacian spectrum; nodes whose per-node test-vector tuples
are nearly parallel (squared cosine close to 1) are spectrally
interchangeable and get aggregated.  The compressed dataset keeps the
member lists so cluster labels can be mapped back later.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from sep_eda.errors import NumericalError
from sep_eda.graph import LaplacianView, NeighborGraph


@dataclass
class TestVectors:
    """K smoothed, mean-centered test vectors over the graph nodes.

    `tuples` is the n-by-K transpose view: row p is node p's signature.
    """

    n: int
    K: int
    vectors: np.ndarray  # (K, n)
    sweeps_applied: int

    @property
    def tuples(self) -> np.ndarray:
        return self.vectors.T


@dataclass
class AggregationMap:
    fine_to_coarse: np.ndarray
    m: int

    @property
    def n(self) -> int:
        return self.fine_to_coarse.size

    def validate(self) -> "AggregationMap":
        if self.fine_to_coarse.min() < 0 or self.fine_to_coarse.max() >= self.m:
            raise ValueError("fine_to_coarse out of range")
        if np.unique(self.fine_to_coarse).size != self.m:
            raise ValueError("fine_to_coarse is not surjective onto [0, m)")
        return self


@dataclass
class CompressedDataset:
    features: np.ndarray  # (m, d) member centroids
    members: list[np.ndarray]
    source: str

    @property
    def m(self) -> int:
        return self.features.shape[0]


def smooth_test_vectors(
    lap: LaplacianView, K: int, sweeps: int, seed: int
) -> TestVectors:
    """Run `sweeps` forward Gauss-Seidel passes of L x = 0 on K random vectors.

    Each vector starts uniform in [-1, 1], is relaxed with
    x_p <- (sum_q w(p,q) x_q) / degree_p in ascending node order, and is
    mean-centered afterwards (the all-ones direction carries no cluster
    information).  Deterministic for a fixed seed.
    """
    if K < 1 or sweeps < 1:
        raise ValueError("K and sweeps must be >= 1")
    zero_deg = np.flatnonzero(lap.degrees == 0)
    if zero_deg.size:
        raise NumericalError(f"zero-degree node {int(zero_deg[0])}: Gauss-Seidel update divides by zero")

    n = lap.n
    w = lap.graph.to_scipy()
    lower = sp.tril(w, k=-1, format="csr")
    upper = sp.triu(w, k=1, format="csr")
    # forward sweep in matrix form: (D - W_lower) x_new = W_upper x_old,
    # solved row by row in ascending order = classic Gauss-Seidel
    forward = (sp.diags(lap.degrees) - lower).tocsr()

    rng = np.random.default_rng(seed)
    vectors = rng.uniform(-1.0, 1.0, size=(K, n))
    for i in range(K):
        x = vectors[i]
        for _ in range(sweeps):
            x = spsolve_triangular(forward, upper @ x, lower=True)
        vectors[i] = x - x.mean()
        if not np.isfinite(vectors[i]).all():
            raise NumericalError(f"test vector {i} diverged during relaxation")
        if np.linalg.norm(vectors[i]) == 0.0:
            raise NumericalError(f"test vector {i} collapsed to zero after centering")
    return TestVectors(n, K, vectors, sweeps)


def structural_correlation(tv: TestVectors, p: int, q: int) -> float:
    """Squared cosine of the two nodes' K-dimensional test-vector tuples.

    Returns a value in [0, 1]; 1 means spectrally interchangeable.  A node
    whose tuple is all-zero carries no spectral signature, so any pair
    involving it scores 0.
    """
    xp = tv.tuples[p]
    xq = tv.tuples[q]
    pp = float(xp @ xp)
    qq = float(xq @ xq)
    if pp == 0.0 or qq == 0.0:
        return 0.0
    cross = float(xp @ xq)
    return min(1.0, (cross * cross) / (pp * qq))


def _sims_to_neighbors(tuples: np.ndarray, norms_sq: np.ndarray, p: int, qs: np.ndarray) -> np.ndarray:
    if norms_sq[p] == 0.0:
        return np.zeros(qs.size)
    cross = tuples[qs] @ tuples[p]
    denom = norms_sq[p] * norms_sq[qs]
    out = np.zeros(qs.size)
    ok = denom > 0
    out[ok] = (cross[ok] * cross[ok]) / denom[ok]
    return np.minimum(out, 1.0)


def aggregate(graph: NeighborGraph, tv: TestVectors, threshold: float) -> AggregationMap:
    """Single greedy pass: each node joins the aggregate of its most
    correlated already-assigned neighbor when the correlation reaches
    `threshold`, otherwise it seeds a new aggregate.

    Nodes are visited in ascending index; ties go to the lower neighbor
    index, so the pass is deterministic.  Only graph neighbors merge, which
    keeps every aggregate connected.
    """
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if tv.n != graph.n:
        raise ValueError("test vectors were built over a different graph")
    n = graph.n
    tuples = np.ascontiguousarray(tv.tuples)
    norms_sq = (tuples * tuples).sum(axis=1)
    fine_to_coarse = np.full(n, -1, dtype=np.int64)
    next_id = 0
    for p in range(n):
        nbrs, _ = graph.neighbors(p)
        prev = nbrs[nbrs < p]  # visited, hence already assigned
        joined = False
        if prev.size:
            sims = _sims_to_neighbors(tuples, norms_sq, p, prev)
            best = int(np.argmax(sims))  # first max = lowest index on ties
            if sims[best] >= threshold:
                fine_to_coarse[p] = fine_to_coarse[prev[best]]
                joined = True
        if not joined:
            fine_to_coarse[p] = next_id
            next_id += 1
    return AggregationMap(fine_to_coarse, next_id).validate()


def aggregate_to_ratio(
    graph: NeighborGraph,
    tv: TestVectors,
    target_ratio: float,
    start_threshold: float = 0.7,
    shrink: float = 0.9,
    floor: float = 0.01,
) -> tuple[AggregationMap, float]:
    """Repeat aggregation passes with a decreasing threshold until
    m / n <= target_ratio (or the threshold floor is hit; merging is
    neighbor-restricted, so m can never drop below the component count)."""
    if not 0 < target_ratio <= 1:
        raise ValueError(f"target_ratio must be in (0, 1], got {target_ratio}")
    threshold = start_threshold
    amap = aggregate(graph, tv, threshold)
    while amap.m / graph.n > target_ratio and threshold * shrink >= floor:
        threshold *= shrink
        amap = aggregate(graph, tv, threshold)
    return amap, threshold


def compress(data, amap: AggregationMap) -> CompressedDataset:
    """Coarse features are member centroids; member lists enable back-mapping."""
    values = data.values if hasattr(data, "values") else np.asarray(data, dtype=np.float64)
    if amap.n != values.shape[0]:
        raise ValueError(f"map covers {amap.n} nodes but data has {values.shape[0]} rows")
    m = amap.m
    counts = np.bincount(amap.fine_to_coarse, minlength=m).astype(np.float64)
    sums = np.zeros((m, values.shape[1]), dtype=np.float64)
    np.add.at(sums, amap.fine_to_coarse, values)
    features = sums / counts[:, None]
    order = np.argsort(amap.fine_to_coarse, kind="stable")
    bounds = np.cumsum(np.bincount(amap.fine_to_coarse, minlength=m))[:-1]
    members = [np.sort(chunk) for chunk in np.split(order, bounds)]
    name = data.name if hasattr(data, "name") else "array"
    return CompressedDataset(features, members, name)
