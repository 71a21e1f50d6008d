"""Spectral clustering: eigensolvers, k-means, pipelines, back-mapping.

The dense symmetric eigensolver uses cyclic Jacobi rotations for small
matrices and LAPACK (scipy) beyond a size cutoff; both sit behind the same
contract (ascending eigenvalues, orthonormal vectors, trivial near-zero
pairs flagged).  The full SEP pipeline chains graph construction,
compression, sphere fitting and SEP search, clusters the SEPs, and maps
labels back through the two aggregation levels.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.linalg

from sep_eda.coarsen import aggregate, aggregate_to_ratio, compress, smooth_test_vectors
from sep_eda.errors import NumericalError
from sep_eda.graph import build_knn_graph, connected_components, laplacian
from sep_eda.sep import SepSet, find_seps
from sep_eda.sphere import default_kernel_q, fit_sphere

_TRIVIAL_REL_TOL = 1e-8
_JACOBI_CUTOFF = 128
_DENSE_GUARD = 10000


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    k: int
    inertia: float

    @property
    def n(self) -> int:
        return self.labels.size


@dataclass
class EigenPairs:
    values: np.ndarray  # ascending
    vectors: np.ndarray  # (n, count), orthonormal columns
    trivial: np.ndarray  # bool mask over values: near-zero eigenvalue

    @property
    def count(self) -> int:
        return self.values.size


def _jacobi_eigh(matrix: np.ndarray, off_tol: float = 1e-10, max_sweeps: int = 100):
    """Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops
    below `off_tol`.  Returns all eigenpairs, ascending."""
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off_sq = (a * a).sum() - (np.diagonal(a) ** 2).sum()
        if off_sq < off_tol * off_tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    values = np.diagonal(a).copy()
    order = np.argsort(values, kind="stable")
    return values[order], v[:, order]


def small_eigs(
    lap_dense: np.ndarray,
    count: int,
    jacobi_cutoff: int = _JACOBI_CUTOFF,
    dense_guard: int = _DENSE_GUARD,
) -> EigenPairs:
    """Bottom `count` eigenpairs of a dense symmetric matrix.

    Near-zero eigenvalues (below 1e-8 times a Gershgorin bound on the
    largest eigenvalue) are flagged trivial so callers can skip them.
    """
    a = np.asarray(lap_dense, dtype=np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    if n > dense_guard:
        raise ValueError(f"n={n} exceeds the dense eigensolver guard {dense_guard}")
    asym = np.abs(a - a.T).max() if n else 0.0
    if asym > 1e-10 * max(1.0, np.abs(a).max()):
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")

    if n <= jacobi_cutoff:
        values, vectors = _jacobi_eigh(a)
        values = values[:count]
        vectors = vectors[:, :count]
    else:
        values, vectors = scipy.linalg.eigh(a, subset_by_index=(0, count - 1))

    bound = float(np.abs(a).sum(axis=1).max()) if n else 0.0
    if bound == 0.0:
        trivial = np.ones(count, dtype=bool)
    else:
        trivial = values < _TRIVIAL_REL_TOL * bound
    return EigenPairs(values, vectors, trivial)


def _kmeans_pp_seed(rows: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = rows.shape[0]
    centers = np.empty((k, rows.shape[1]))
    first = int(rng.integers(n))
    centers[0] = rows[first]
    d2 = ((rows - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            # remaining points coincide with chosen centers; take lowest index
            taken = np.flatnonzero(d2 == 0)
            pick = int(taken[min(c - 1, taken.size - 1)]) if taken.size else 0
            pick = int(np.flatnonzero(d2 >= 0)[0]) if d2.size else 0
        else:
            pick = int(rng.choice(n, p=d2 / total))
        centers[c] = rows[pick]
        d2 = np.minimum(d2, ((rows - centers[c]) ** 2).sum(axis=1))
    return centers


def _lloyd(rows: np.ndarray, centers: np.ndarray, max_iter: int):
    n, k = rows.shape[0], centers.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    inertia = np.inf
    for _ in range(max_iter):
        d2 = (
            (rows * rows).sum(axis=1)[:, None]
            + (centers * centers).sum(axis=1)[None, :]
            - 2.0 * rows @ centers.T
        )
        np.maximum(d2, 0.0, out=d2)
        new_labels = d2.argmin(axis=1)
        point_cost = d2[np.arange(n), new_labels]
        # repair empty clusters by stealing the globally farthest point from
        # any cluster that can spare one
        sizes = np.bincount(new_labels, minlength=k)
        for empty in np.flatnonzero(sizes == 0):
            donors = np.flatnonzero(sizes[new_labels] > 1)
            if donors.size == 0:
                break
            worst = donors[np.argmax(point_cost[donors])]
            sizes[new_labels[worst]] -= 1
            new_labels[worst] = empty
            sizes[empty] += 1
            point_cost[worst] = 0.0
        if (new_labels == labels).all():
            break
        labels = new_labels
        for c in range(k):
            members = labels == c
            if members.any():
                centers[c] = rows[members].mean(axis=0)
        inertia = float(
            ((rows - centers[labels]) ** 2).sum()
        )
    return labels, centers, inertia


def kmeans(
    rows: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 300,
    restarts: int = 10,
) -> ClusterAssignment:
    """k-means++ seeding plus Lloyd iterations; best of `restarts` by inertia."""
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    n = rows.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds the number of rows n={n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    best_labels, best_inertia = None, np.inf
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        centers = _kmeans_pp_seed(rows, k, rng)
        labels, _, inertia = _lloyd(rows, centers.copy(), max_iter)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return ClusterAssignment(best_labels, k, best_inertia)


def spectral_embedding(graph, k: int, variant: str, dense_guard: int) -> np.ndarray:
    """Rows of the bottom informative eigenvectors.

    The global constant direction (the zero-eigenvalue mode present on any
    graph) is projected out of the trivial eigenspace; the remaining
    trivial directions are component contrasts and stay, since they carry
    exactly the disconnected-cluster structure.
    """
    lap = laplacian(graph)
    n = graph.n
    comps = int(connected_components(graph).max()) + 1
    need = min(n, k + comps)
    dense = lap.dense()
    if variant == "sym-normalized":
        inv_sqrt = 1.0 / np.sqrt(lap.degrees)
        dense = dense * inv_sqrt[:, None] * inv_sqrt[None, :]
        ones_dir = np.sqrt(lap.degrees)
    elif variant == "unnormalized":
        ones_dir = np.ones(n)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    ones_dir = ones_dir / np.linalg.norm(ones_dir)

    eigs = small_eigs(dense, need, dense_guard=dense_guard)
    trivial_vecs = eigs.vectors[:, eigs.trivial]
    nontrivial_vecs = eigs.vectors[:, ~eigs.trivial]
    columns = []
    if trivial_vecs.shape[1]:
        contrasts = trivial_vecs - ones_dir[:, None] * (ones_dir @ trivial_vecs)
        u, sigma, _ = np.linalg.svd(contrasts, full_matrices=False)
        keep = sigma > 1e-8
        if keep.any():
            columns.append(u[:, keep])
    if nontrivial_vecs.shape[1]:
        columns.append(nontrivial_vecs)
    if columns:
        embedding = np.hstack(columns)[:, :k]
    else:
        embedding = ones_dir[:, None]
    if variant == "sym-normalized":
        norms = np.linalg.norm(embedding, axis=1, keepdims=True)
        embedding = np.where(norms > 0, embedding / np.where(norms > 0, norms, 1.0), embedding)
    return embedding


def spectral_cluster(
    data,
    k: int,
    k_nn: int = 10,
    variant: str = "unnormalized",
    weighting: str = "gaussian",
    seed: int = 0,
    kmeans_restarts: int = 10,
    dense_guard: int = _DENSE_GUARD,
) -> ClusterAssignment:
    """Classic three-step spectral clustering over the full dataset."""
    values = data.values if hasattr(data, "values") else np.asarray(data, dtype=np.float64)
    if k < 2:
        raise ValueError("k must be >= 2")
    graph = build_knn_graph(values, min(k_nn, values.shape[0] - 1), weighting)
    embedding = spectral_embedding(graph, k, variant, dense_guard)
    return kmeans(embedding, k, seed, restarts=kmeans_restarts)


@dataclass
class PipelineParams:
    """Every knob of the SEP pipeline, JSON-serializable for reproducibility."""

    k_nn: int = 10
    weighting: str = "gaussian"
    test_vectors: int = 5
    sweeps: int = 10
    agg_threshold: float = 0.7
    target_ratio: float | None = None
    kernel_q: float | None = None  # None: median-distance heuristic
    svc_c: float = 1.0
    grad_tol: float = 1e-5
    merge_tol: float | None = None  # None: 1e-3 x dataset diameter
    max_descent_iters: int = 500
    variant: str = "unnormalized"
    kmeans_restarts: int = 10
    perplexity: float = 30.0
    tsne_iters: int = 1000
    learning_rate: float = 200.0
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    dense_guard: int = _DENSE_GUARD

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineParams":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown pipeline parameter(s): {sorted(unknown)}")
        return cls(**d)


@dataclass
class PipelineTrace:
    """What the pipeline did and how long each stage took."""

    n: int = 0
    d: int = 0
    m: int = 0
    s: int = 0
    wall_ms: dict = field(default_factory=dict)
    threshold_used: float | None = None
    q_used: float | None = None
    merge_tol_used: float | None = None
    sphere_converged: bool = True
    sep_degraded: bool = False
    sep_fine_counts: np.ndarray | None = None
    sep_majority_labels: np.ndarray | None = None
    sep_label_mass: np.ndarray | None = None  # (s, num_classes) fine-point counts

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "d": self.d,
            "m": self.m,
            "s": self.s,
            "wall_ms": {k: round(v, 3) for k, v in self.wall_ms.items()},
            "threshold_used": self.threshold_used,
            "q_used": self.q_used,
            "merge_tol_used": self.merge_tol_used,
            "sphere_converged": self.sphere_converged,
            "sep_degraded": self.sep_degraded,
        }
        if self.sep_fine_counts is not None:
            out["sep_fine_counts"] = self.sep_fine_counts.tolist()
        if self.sep_majority_labels is not None:
            out["sep_majority_labels"] = self.sep_majority_labels.tolist()
        return out


class _StageClock:
    def __init__(self):
        self.wall_ms: dict[str, float] = {}

    def time(self, name: str):
        clock = self

        class _Ctx:
            def __enter__(self_inner):
                self_inner.t0 = time.perf_counter()

            def __exit__(self_inner, *exc):
                clock.wall_ms[name] = clock.wall_ms.get(name, 0.0) + (
                    time.perf_counter() - self_inner.t0
                ) * 1000.0
                return False

        return _Ctx()


def run_sep_reduction(data, params: PipelineParams, seed: int):
    """Shared front half of both SEP pipelines: graph -> compress -> sphere
    -> SEP search.  Returns (sep_set, compressed, amap, model, trace)."""
    values = data.values if hasattr(data, "values") else np.asarray(data, dtype=np.float64)
    clock = _StageClock()
    trace = PipelineTrace(n=values.shape[0], d=values.shape[1], wall_ms=clock.wall_ms)

    with clock.time("graph"):
        graph = build_knn_graph(values, min(params.k_nn, values.shape[0] - 1), params.weighting)
    with clock.time("smooth"):
        tv = smooth_test_vectors(laplacian(graph), params.test_vectors, params.sweeps, seed)
    with clock.time("aggregate"):
        if params.target_ratio is not None:
            amap, threshold_used = aggregate_to_ratio(
                graph, tv, params.target_ratio, params.agg_threshold
            )
        else:
            amap = aggregate(graph, tv, params.agg_threshold)
            threshold_used = params.agg_threshold
    trace.threshold_used = threshold_used
    with clock.time("compress"):
        compressed = compress(data, amap)
    trace.m = compressed.m

    q = params.kernel_q if params.kernel_q is not None else default_kernel_q(compressed.features)
    trace.q_used = q
    with clock.time("svc"):
        model = fit_sphere(compressed.features, q, params.svc_c)
    trace.sphere_converged = model.converged
    with clock.time("sep"):
        sep_set = find_seps(
            model,
            compressed.features,
            grad_tol=params.grad_tol,
            merge_tol=params.merge_tol,
            max_iters=params.max_descent_iters,
        )
    trace.s = sep_set.s
    trace.merge_tol_used = sep_set.merge_tol
    trace.sep_degraded = sep_set.degraded

    fine_counts = np.zeros(sep_set.s, dtype=np.int64)
    coarse_sizes = np.bincount(amap.fine_to_coarse, minlength=amap.m)
    np.add.at(fine_counts, sep_set.assignment, coarse_sizes)
    trace.sep_fine_counts = fine_counts
    labels = getattr(data, "labels", None)
    if labels is not None:
        num_classes = int(labels.max()) + 1
        mass = np.zeros((sep_set.s, num_classes), dtype=np.int64)
        sep_of_fine = sep_set.assignment[amap.fine_to_coarse]
        np.add.at(mass, (sep_of_fine, labels), 1)
        trace.sep_label_mass = mass
        trace.sep_majority_labels = mass.argmax(axis=1)
    return sep_set, compressed, amap, model, trace


def sep_spectral_cluster(
    data,
    k: int,
    params: PipelineParams | None = None,
    seed: int = 0,
) -> tuple[ClusterAssignment, PipelineTrace]:
    """Full SEP clustering: compress, find SEPs, cluster them, map back."""
    if k < 2:
        raise ValueError("k must be >= 2")
    params = params or PipelineParams()
    sep_set, compressed, amap, model, trace = run_sep_reduction(data, params, seed)
    clock = _StageClock()
    clock.wall_ms.update(trace.wall_ms)
    trace.wall_ms = clock.wall_ms

    if sep_set.s < k:
        raise NumericalError(
            f"found {sep_set.s} SEPs but {k} clusters were requested; raise "
            "--kernel-q or --agg-threshold so more attractors survive"
        )
    with clock.time("cluster"):
        sep_labels = spectral_cluster(
            sep_set.seps,
            k,
            k_nn=min(10, sep_set.s - 1),
            variant=params.variant,
            seed=seed,
            kmeans_restarts=params.kmeans_restarts,
            dense_guard=params.dense_guard,
        )
    with clock.time("backmap"):
        fine = backmap(sep_labels, sep_set, amap)
    return fine, trace


def backmap(sep_labels: ClusterAssignment, seps: SepSet, amap) -> ClusterAssignment:
    """Two-level label propagation SEP -> compressed point -> original point."""
    if sep_labels.n != seps.s:
        raise ValueError(
            f"sep_labels covers {sep_labels.n} SEPs but the set has {seps.s}"
        )
    if seps.assignment.size != amap.m:
        raise ValueError(
            f"SEP assignment covers {seps.assignment.size} compressed points, map has {amap.m}"
        )
    fine_labels = sep_labels.labels[seps.assignment[amap.fine_to_coarse]]
    return ClusterAssignment(fine_labels, sep_labels.k, sep_labels.inertia)
