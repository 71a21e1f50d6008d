"""Gradient-descent search for stable equilibrium points (SEPs).

Every compressed point follows the negative gradient of the squared radial
distance f until the gradient vanishes; endpoints that land within a merge
tolerance of each other are the same attractor and collapse into one SEP.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sep_eda.sphere import SphereModel, radius_grad, radius_sq

_MAX_HALVINGS = 50
_MAX_MERGE_ROUNDS = 10


@dataclass
class SepSet:
    seps: np.ndarray  # (s, d) distinct attractor coordinates
    assignment: np.ndarray  # (m,) SEP index per compressed point
    iterations: np.ndarray  # (m,) accepted descent steps per point
    converged: np.ndarray  # (m,) reached grad_tol before the caps
    grad_norms: np.ndarray  # (s,) final gradient norm at each SEP
    degraded: bool
    grad_tol: float
    merge_tol: float

    @property
    def s(self) -> int:
        return self.seps.shape[0]

    def member_counts(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.s)


def default_step0(q: float) -> float:
    """Step scaled to the gradient's natural magnitude 4q."""
    return 0.1 / (4.0 * q)


def _descend_batch(
    model: SphereModel,
    x0: np.ndarray,
    step0: float,
    grad_tol: float,
    max_iters: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized explicit-Euler descent with per-point backtracking.

    Each point halves its step while f would increase and resets it to
    step0 after an accepted step, so f never increases along a trajectory.
    Trajectories are independent; batching only groups the evaluations.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    if x.ndim == 1:
        x = x[None, :]
    count = x.shape[0]
    f = np.atleast_1d(radius_sq(model, x))
    eta = np.full(count, step0)
    iters = np.zeros(count, dtype=np.int64)
    converged = np.zeros(count, dtype=bool)
    stalls = np.zeros(count, dtype=np.int64)
    active = np.arange(count)

    while active.size:
        grad = radius_grad(model, x[active])
        if grad.ndim == 1:
            grad = grad[None, :]
        gnorm = np.linalg.norm(grad, axis=1)
        done = gnorm < grad_tol
        converged[active[done]] = True
        capped = ~done & (iters[active] >= max_iters)
        keep = ~done & ~capped
        active = active[keep]
        if not active.size:
            break
        grad = grad[keep]

        trial = x[active] - eta[active, None] * grad
        f_trial = np.atleast_1d(radius_sq(model, trial))
        accepted = f_trial < f[active]
        acc = active[accepted]
        x[acc] = trial[accepted]
        f[acc] = f_trial[accepted]
        eta[acc] = step0
        iters[acc] += 1
        stalls[acc] = 0
        rej = active[~accepted]
        eta[rej] *= 0.5
        stalls[rej] += 1
        active = active[stalls[active] <= _MAX_HALVINGS]

    return x, iters, converged


def descend(
    model: SphereModel,
    x0: np.ndarray,
    step0: float | None = None,
    grad_tol: float = 1e-5,
    max_iters: int = 500,
) -> tuple[np.ndarray, int, bool]:
    """Drive one point to its attractor; returns (point, iters, converged)."""
    if step0 is None:
        step0 = default_step0(model.q)
    if step0 <= 0 or grad_tol <= 0:
        raise ValueError("step0 and grad_tol must be positive")
    x, iters, converged = _descend_batch(
        model, np.asarray(x0, dtype=np.float64)[None, :], step0, grad_tol, max_iters
    )
    return x[0], int(iters[0]), bool(converged[0])


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # lower root wins, keeps labels deterministic
            if rb < ra:
                ra, rb = rb, ra
            self.parent[rb] = ra


def _single_linkage_groups(points: np.ndarray, tol: float) -> list[np.ndarray]:
    """Connected components of the graph 'distance < tol', ordered by
    smallest member index."""
    count = points.shape[0]
    uf = _UnionFind(count)
    sq = (
        (points * points).sum(axis=1)[:, None]
        + (points * points).sum(axis=1)[None, :]
        - 2.0 * points @ points.T
    )
    np.maximum(sq, 0.0, out=sq)
    close = np.sqrt(sq) < tol
    ii, jj = np.nonzero(np.triu(close, k=1))
    for a, b in zip(ii.tolist(), jj.tolist()):
        uf.union(a, b)
    roots = np.array([uf.find(i) for i in range(count)])
    order = {}
    for r in roots:
        if r not in order:
            order[r] = len(order)
    groups: list[list[int]] = [[] for _ in range(len(order))]
    for i, r in enumerate(roots):
        groups[order[r]].append(i)
    return [np.asarray(g) for g in groups]


def dataset_diameter(points: np.ndarray) -> float:
    sq = (
        (points * points).sum(axis=1)[:, None]
        + (points * points).sum(axis=1)[None, :]
        - 2.0 * points @ points.T
    )
    return float(np.sqrt(max(sq.max(), 0.0)))


def find_seps(
    model: SphereModel,
    points: np.ndarray,
    grad_tol: float = 1e-5,
    merge_tol: float | None = None,
    max_iters: int = 500,
    step0: float | None = None,
) -> SepSet:
    """Descend every point, merge coincident endpoints, record assignments.

    merge_tol defaults to 1e-3 times the dataset diameter.  Merged SEP
    coordinates are endpoint centroids, re-descended when the centroid
    itself fails the gradient tolerance; merging repeats until all SEP
    pairs are at least merge_tol apart.  Flags the whole set as degraded
    when more than 10% of the points fail to converge.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if step0 is None:
        step0 = default_step0(model.q)
    if merge_tol is None:
        diameter = dataset_diameter(points)
        merge_tol = 1e-3 * diameter if diameter > 0 else 1e-9

    endpoints, iterations, converged = _descend_batch(
        model, points, step0, grad_tol, max_iters
    )

    groups = _single_linkage_groups(endpoints, merge_tol)
    seps = np.stack([endpoints[g].mean(axis=0) for g in groups])
    for _ in range(_MAX_MERGE_ROUNDS):
        grad_norms = np.linalg.norm(np.atleast_2d(radius_grad(model, seps)), axis=1)
        for idx in np.flatnonzero(grad_norms >= grad_tol):
            seps[idx], _, _ = descend(model, seps[idx], step0, grad_tol, max_iters)
        regroups = _single_linkage_groups(seps, merge_tol)
        if len(regroups) == len(groups):
            # map every original endpoint group onto the (possibly re-merged) sep
            break
        seps = np.stack([seps[g].mean(axis=0) for g in regroups])
        groups = [np.concatenate([groups[i] for i in g]) for g in regroups]

    grad_norms = np.linalg.norm(np.atleast_2d(radius_grad(model, seps)), axis=1)
    assignment = np.empty(points.shape[0], dtype=np.int64)
    for sep_id, g in enumerate(groups):
        assignment[g] = sep_id
    degraded = bool((~converged).mean() > 0.10)
    return SepSet(
        seps,
        assignment,
        iterations,
        converged,
        grad_norms,
        degraded,
        grad_tol,
        merge_tol,
    )
