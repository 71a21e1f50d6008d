"""Exact t-SNE and its SEP-accelerated variant.

High-dimensional affinities are Gaussian conditionals calibrated per point
so the conditional entropy matches a target perplexity, symmetrized into a
joint distribution; the 2-D embedding minimizes the KL divergence to the
Student-t low-dimensional affinities by momentum gradient descent.  The
accelerated variant runs the same exact optimizer over the SEP
representatives only, turning the quadratic cost in n into one in s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sep_eda.errors import NumericalError
from sep_eda.cluster import PipelineParams, PipelineTrace, kmeans, run_sep_reduction, _StageClock
from sep_eda.sep import SepSet

_P_FLOOR = 1e-12
_SIGMA_LO = 1e-12
_SIGMA_HI = 1e12
_BISECT_STEPS = 64
_PERPLEXITY_TOL = 1e-4


@dataclass
class AffinityMatrix:
    n: int
    p: np.ndarray  # symmetric, zero diagonal, sums to 1 off-diagonal
    perplexity_used: float

    def validate(self) -> "AffinityMatrix":
        if np.abs(np.diagonal(self.p)).max(initial=0.0) != 0.0:
            raise ValueError("affinity diagonal must be zero")
        if np.abs(self.p - self.p.T).max() > 1e-12:
            raise ValueError("affinity matrix must be symmetric")
        if abs(self.p.sum() - 1.0) > 1e-10:
            raise ValueError("affinity mass must be 1")
        return self


@dataclass
class Embedding2D:
    coords: np.ndarray  # (n, 2)
    final_kl: float
    iters_run: int


def _sq_dists(values: np.ndarray) -> np.ndarray:
    sq = (values * values).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * values @ values.T
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _row_entropy_bits(sq_row: np.ndarray, sigma: float) -> float:
    """Shannon entropy (bits) of the Gaussian conditional with width sigma."""
    expo = -sq_row / (2.0 * sigma * sigma)
    expo -= expo.max()
    w = np.exp(expo)
    z = w.sum()
    p = w / z
    nz = p > 0
    return float(-(p[nz] * np.log2(p[nz])).sum())


def perplexity_sigmas(sq_dists: np.ndarray, perplexity: float) -> np.ndarray:
    """Per-row Gaussian width so each conditional hits the target perplexity.

    Bisection over sigma in (1e-12, 1e12); stops early once
    |2^entropy - perplexity| < 1e-4, within 64 steps.
    """
    n = sq_dists.shape[0]
    if not 1.0 < perplexity < n:
        raise ValueError(f"perplexity must be in (1, n={n}), got {perplexity}")
    target_bits = np.log2(perplexity)
    sigmas = np.empty(n)
    others = ~np.eye(n, dtype=bool)
    for i in range(n):
        row = sq_dists[i][others[i]]
        lo, hi = _SIGMA_LO, _SIGMA_HI
        sigma = 1.0
        for _ in range(_BISECT_STEPS):
            sigma = 0.5 * (lo + hi)
            bits = _row_entropy_bits(row, sigma)
            if abs(2.0 ** bits - perplexity) < _PERPLEXITY_TOL:
                break
            if bits > target_bits:
                hi = sigma
            else:
                lo = sigma
        sigmas[i] = sigma
    return sigmas


def p_matrix(data, perplexity: float = 30.0) -> AffinityMatrix:
    """Joint high-dimensional affinities: calibrated Gaussian conditionals,
    symmetrized and normalized to unit mass, with a small off-diagonal
    floor for numerical stability."""
    values = data.values if hasattr(data, "values") else np.asarray(data, dtype=np.float64)
    n = values.shape[0]
    d2 = _sq_dists(values)
    sigmas = perplexity_sigmas(d2, perplexity)
    cond = np.exp(-d2 / (2.0 * sigmas[:, None] ** 2))
    np.fill_diagonal(cond, 0.0)
    cond /= cond.sum(axis=1, keepdims=True)
    p = (cond + cond.T) / (2.0 * n)
    off = ~np.eye(n, dtype=bool)
    p[off] = np.maximum(p[off], _P_FLOOR)
    p /= p.sum()
    return AffinityMatrix(n, p, perplexity)


def _student_t_num(coords: np.ndarray) -> np.ndarray:
    num = 1.0 / (1.0 + _sq_dists(coords))
    np.fill_diagonal(num, 0.0)
    return num


def q_matrix(coords: np.ndarray) -> np.ndarray:
    """Low-dimensional Student-t affinities, normalized over all pairs."""
    num = _student_t_num(np.asarray(coords, dtype=np.float64))
    return num / num.sum()


def kl_cost(p, q: np.ndarray) -> float:
    """sum_{i != j} p log(p / q), with 0 log(0/q) = 0."""
    p_arr = p.p if hasattr(p, "p") else np.asarray(p, dtype=np.float64)
    if p_arr.shape != q.shape:
        raise ValueError(f"shape mismatch: p {p_arr.shape} vs q {q.shape}")
    mask = p_arr > 0
    if (q[mask] <= 0).any():
        raise NumericalError("degenerate embedding: q = 0 where p > 0")
    return float((p_arr[mask] * np.log(p_arr[mask] / q[mask])).sum())


def kl_gradient(p, coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Analytic KL gradient wrt the embedding; also returns the Q matrix.

    grad_i = 4 sum_j (p_ij - q_ij) (1 + ||y_i - y_j||^2)^-1 (y_i - y_j)
    """
    p_arr = p.p if hasattr(p, "p") else np.asarray(p, dtype=np.float64)
    coords = np.asarray(coords, dtype=np.float64)
    num = _student_t_num(coords)
    q = num / num.sum()
    pqn = (p_arr - q) * num
    grad = 4.0 * (pqn.sum(axis=1)[:, None] * coords - pqn @ coords)
    return grad, q


def tsne_embed(
    p: AffinityMatrix,
    iters: int = 1000,
    learning_rate: float = 200.0,
    seed: int = 0,
    momentum_early: float = 0.5,
    momentum_late: float = 0.8,
    early_exaggeration: float = 12.0,
    schedule_switch: int = 250,
) -> Embedding2D:
    """Momentum gradient descent on the KL cost from a tiny Gaussian init.

    The affinities are exaggerated for the first `schedule_switch`
    iterations and the momentum steps up afterwards; the reported KL always
    uses the true (unexaggerated) affinities.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    p_true = p.p if hasattr(p, "p") else np.asarray(p, dtype=np.float64)
    n = p_true.shape[0]
    rng = np.random.default_rng(seed)
    coords = rng.normal(0.0, 1e-2, size=(n, 2))
    update = np.zeros_like(coords)
    p_exag = p_true * early_exaggeration
    for it in range(iters):
        current = p_exag if it < schedule_switch else p_true
        grad, _ = kl_gradient(current, coords)
        momentum = momentum_early if it < schedule_switch else momentum_late
        update = momentum * update - learning_rate * grad
        coords = coords + update
        coords -= coords.mean(axis=0)
        if not np.isfinite(coords).all():
            raise NumericalError(f"embedding blew up at iteration {it}")
    final_kl = kl_cost(p_true, q_matrix(coords))
    return Embedding2D(coords, final_kl, iters)


def effective_perplexity(requested: float, n: int) -> float:
    """Clamp the perplexity so the calibration target stays reachable."""
    return max(2.0, min(requested, (n - 1) / 3.0))


def sep_tsne(
    data,
    k_for_color: int | None = None,
    params: PipelineParams | None = None,
    seed: int = 0,
) -> tuple[Embedding2D, SepSet, PipelineTrace]:
    """Compress the dataset to SEPs and run exact t-SNE on them alone.

    When ground-truth labels exist the trace carries each SEP's
    majority label and fine-point count (marker color/size for rendering);
    otherwise `k_for_color` clusters the SEP coordinates for coloring.
    """
    params = params or PipelineParams()
    sep_set, _, _, _, trace = run_sep_reduction(data, params, seed)
    if sep_set.s < 4:
        raise NumericalError(
            f"only {sep_set.s} SEPs; too few for a meaningful embedding — "
            "raise --kernel-q or --agg-threshold"
        )
    clock = _StageClock()
    clock.wall_ms.update(trace.wall_ms)
    trace.wall_ms = clock.wall_ms
    with clock.time("tsne"):
        perp = effective_perplexity(params.perplexity, sep_set.s)
        affinities = p_matrix(sep_set.seps, perp)
        embedding = tsne_embed(
            affinities,
            iters=params.tsne_iters,
            learning_rate=params.learning_rate,
            seed=seed,
            momentum_early=params.momentum_early,
            momentum_late=params.momentum_late,
            early_exaggeration=params.early_exaggeration,
            schedule_switch=params.exaggeration_iters,
        )
    if trace.sep_majority_labels is None and k_for_color is not None:
        coloring = kmeans(sep_set.seps, min(k_for_color, sep_set.s), seed)
        trace.sep_majority_labels = coloring.labels
    return embedding, sep_set, trace


def embedding_class_coverage(
    coords: np.ndarray,
    label_mass: np.ndarray,
    k: int,
    seed: int = 0,
) -> int:
    """How many classes dominate at least one spatial cell of the embedding.

    The embedding is split into k cells by k-means; each cell's majority
    class is taken over the summed fine-point label mass of its SEPs.  A
    class "shows up" in the picture when some cell is majority that class.
    """
    cells = kmeans(np.asarray(coords, dtype=np.float64), min(k, coords.shape[0]), seed)
    covered: set[int] = set()
    for c in range(cells.k):
        in_cell = cells.labels == c
        if not in_cell.any():
            continue
        mass = label_mass[in_cell].sum(axis=0)
        if mass.sum() > 0:
            covered.add(int(mass.argmax()))
    return len(covered)
