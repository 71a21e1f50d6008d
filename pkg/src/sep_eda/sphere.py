"""Minimal enclosing hypersphere in Gaussian-kernel feature space.

With K(x, y) = exp(-q ||x - y||^2) the squared radial distance of a point's
feature-space image from the sphere center a = sum_j beta_j Phi(x_j) is

    f(x) = 1 - 2 sum_j beta_j K(x_j, x) + sum_ij beta_i beta_j K(x_i, x_j)

The multipliers come from the dual problem
    minimize  beta' K beta   s.t.  sum beta = 1,  0 <= beta <= c_upper
solved by pairwise coordinate descent on the maximal-KKT-violation pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sep_eda.errors import NumericalError

_BOX_ATOL = 1e-9


@dataclass
class SphereModel:
    points: np.ndarray  # (m, d) training features
    beta: np.ndarray  # (m,) Lagrange multipliers
    q: float
    c_upper: float
    self_term: float  # beta' K beta
    r_sq: float
    converged: bool = True
    n_iter: int = 0

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def support_indices(self) -> np.ndarray:
        """Indices with 0 < beta < c_upper (on-sphere points)."""
        return np.flatnonzero(
            (self.beta > _BOX_ATOL) & (self.beta < self.c_upper - _BOX_ATOL)
        )

    def dual_objective(self) -> float:
        """Value of the maximized dual: sum_j beta_j K_jj - beta' K beta."""
        return 1.0 - self.self_term


def kernel_value(x: np.ndarray, y: np.ndarray, q: float) -> float:
    """exp(-q ||x - y||^2)."""
    if q <= 0:
        raise ValueError(f"kernel width q must be positive, got {q}")
    diff = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return float(np.exp(-q * np.dot(diff, diff)))


def _cross_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = (
        (a * a).sum(axis=1)[:, None]
        + (b * b).sum(axis=1)[None, :]
        - 2.0 * a @ b.T
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def gaussian_gram(points: np.ndarray, q: float) -> np.ndarray:
    """Symmetric kernel matrix with unit diagonal."""
    gram = np.exp(-q * _cross_sq_dists(points, points))
    gram = 0.5 * (gram + gram.T)
    np.fill_diagonal(gram, 1.0)
    return gram


def default_kernel_q(points: np.ndarray, subsample: int = 1000) -> float:
    """Median-distance heuristic: q = 1 / (2 median^2), computed on an
    evenly spaced subsample of at most `subsample` rows."""
    points = np.asarray(points, dtype=np.float64)
    m = points.shape[0]
    if m > subsample:
        step = int(np.ceil(m / subsample))
        points = points[::step]
        m = points.shape[0]
    if m < 2:
        return 1.0
    d2 = _cross_sq_dists(points, points)
    iu = np.triu_indices(m, k=1)
    med = float(np.median(np.sqrt(d2[iu])))
    if med <= 0:
        return 1.0
    return 1.0 / (2.0 * med * med)


def fit_sphere(
    points: np.ndarray,
    q: float,
    c_upper: float = 1.0,
    tol: float = 1e-6,
    max_iter: int | None = None,
) -> SphereModel:
    """Solve the dual by repeatedly optimizing the maximal-violation pair.

    Each step picks i with the largest f (can still grow: beta_i < c_upper)
    and j with the smallest f (can still shrink: beta_j > 0) and moves mass
    from j to i along the closed-form quadratic minimizer, clipped to the
    box.  Terminates when the largest KKT violation f_i - f_j drops below
    `tol`; a capped run returns a model flagged non-converged.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError("points must be a non-empty (m, d) array")
    if q <= 0:
        raise ValueError(f"kernel width q must be positive, got {q}")
    m = points.shape[0]
    if not 0 < c_upper <= 1:
        raise ValueError(f"c_upper must lie in (0, 1], got {c_upper}")
    if c_upper * m < 1.0 - 1e-12:
        raise NumericalError(
            f"c_upper={c_upper} infeasible: need c_upper >= 1/m = {1.0 / m:.6g}"
        )

    if m == 1:
        return SphereModel(points, np.ones(1), q, c_upper, 1.0, 0.0, True, 0)

    gram = gaussian_gram(points, q)
    beta = np.full(m, 1.0 / m)
    kb = gram @ beta  # (K beta)_j, kept incrementally up to date
    if max_iter is None:
        max_iter = max(200 * m, 20_000)

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        self_term = float(beta @ kb)
        f = 1.0 - 2.0 * kb + self_term
        up = beta < c_upper - _BOX_ATOL
        down = beta > _BOX_ATOL
        if not up.any() or not down.any():
            converged = True
            break
        f_up = np.where(up, f, -np.inf)
        f_down = np.where(down, f, np.inf)
        i = int(np.argmax(f_up))
        j = int(np.argmin(f_down))
        violation = f[i] - f[j]
        if violation < tol:
            converged = True
            break
        curvature = 4.0 * (1.0 - gram[i, j])
        box = min(c_upper - beta[i], beta[j])
        if curvature <= 1e-15:
            delta = box
        else:
            delta = min(violation / curvature, box)
        if delta <= 0:
            converged = True  # numerically pinned at the box
            break
        beta[i] += delta
        beta[j] -= delta
        kb += delta * (gram[:, i] - gram[:, j])
        if it % 1000 == 0:
            kb = gram @ beta  # kill incremental drift

    kb = gram @ beta
    self_term = float(beta @ kb)
    f = 1.0 - 2.0 * kb + self_term
    free = (beta > _BOX_ATOL) & (beta < c_upper - _BOX_ATOL)
    if free.any():
        r_sq = float(f[free].mean())
    elif (beta >= c_upper - _BOX_ATOL).any():
        r_sq = float(f[beta >= c_upper - _BOX_ATOL].min())
    else:
        r_sq = float(f.max())
    return SphereModel(
        points, beta, q, c_upper, self_term, max(r_sq, 0.0), converged, it
    )


def _cross_kernel(model: SphereModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    batch = arr[None, :] if single else arr
    kx = np.exp(-model.q * _cross_sq_dists(batch, model.points))
    return kx, batch, single


def radius_sq(model: SphereModel, x: np.ndarray) -> float | np.ndarray:
    """Squared radial distance f(x); accepts a single vector or a batch."""
    kx, _, single = _cross_kernel(model, x)
    f = 1.0 - 2.0 * (kx @ model.beta) + model.self_term
    np.maximum(f, 0.0, out=f)
    return float(f[0]) if single else f


def radius_grad(model: SphereModel, x: np.ndarray) -> np.ndarray:
    """Analytic gradient of f: 4q sum_j beta_j K(x_j, x) (x - x_j)."""
    kx, batch, single = _cross_kernel(model, x)
    weights = kx * model.beta  # (B, m)
    grad = 4.0 * model.q * (
        weights.sum(axis=1)[:, None] * batch - weights @ model.points
    )
    return grad[0] if single else grad
