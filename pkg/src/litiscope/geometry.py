"""Geometric primitives: K-means, convex-hull distance, ratio convention.

Hull distance is computed without building facets: minimize the distance
between the query and a convex combination of the member points with an
away-step Frank-Wolfe iteration over the weight simplex. That stays
workable in the 40+-dimensional feature space where facet enumeration is
hopeless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError

HULL_TOL = 1e-6
HULL_MAX_ITER = 10_000

KMEANS_TOL = 1e-9
KMEANS_MAX_ITER = 300


def safe_ratio(numerator: float, denominator: float) -> float:
    """a/b with the division-by-zero convention used everywhere here.

    b = 0 with a > 0 gives +inf; 0/0 is defined as 1 (a neutral value:
    neither side of the comparison wins).
    """
    if numerator < 0 or denominator < 0:
        raise ValueError("safe_ratio arguments must be nonnegative")
    if denominator > 0:
        return numerator / denominator
    return math.inf if numerator > 0 else 1.0


def safe_ratios(numerators: np.ndarray, denominators: np.ndarray) -> np.ndarray:
    """Elementwise safe_ratio."""
    num = np.asarray(numerators, dtype=float)
    den = np.asarray(denominators, dtype=float)
    if np.any(num < 0) or np.any(den < 0):
        raise ValueError("safe_ratio arguments must be nonnegative")
    out = np.where(num > 0, np.inf, 1.0)
    pos = den > 0
    out[pos] = num[pos] / den[pos]
    return out


# --------------------------------------------------------------------------
# K-means


@dataclass(frozen=True, eq=False)
class ClusterSet:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    points: np.ndarray
    n_iter: int
    objective_history: tuple[float, ...] = field(repr=False, default=())

    def members(self, cluster: int) -> np.ndarray:
        return self.points[self.assignments == cluster]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


def _kmeanspp_seeds(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    seeds = np.empty((k, points.shape[1]))
    seeds[0] = points[int(rng.integers(0, n))]
    d2 = ((points - seeds[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            # All remaining mass on already-chosen points; any distinct
            # point would have d2 > 0, so this cannot happen while
            # k <= distinct count. Guard anyway.
            seeds[i] = points[int(rng.integers(0, n))]
            continue
        pick = int(np.searchsorted(np.cumsum(d2), rng.uniform(0, total), side="right"))
        pick = min(pick, n - 1)
        seeds[i] = points[pick]
        d2 = np.minimum(d2, ((points - seeds[i]) ** 2).sum(axis=1))
    return seeds


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = KMEANS_MAX_ITER,
    tol: float = KMEANS_TOL,
) -> ClusterSet:
    """Lloyd's algorithm from k-means++ seeding, deterministic per seed."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a nonempty 2-D array")
    n_distinct = np.unique(points, axis=0).shape[0]
    if not 1 <= k <= n_distinct:
        raise ValueError(f"k must lie in [1, {n_distinct}] (distinct points), got {k}")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_seeds(points, k, rng)
    history: list[float] = []
    assignments = np.zeros(points.shape[0], dtype=np.int64)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assignments = d2.argmin(axis=1)
        # Reseed any emptied cluster to the point farthest from its
        # current centroid; that point's cost drops to zero and nobody
        # else's can rise, so the objective stays monotone.
        costs = d2[np.arange(points.shape[0]), assignments]
        for c in range(k):
            if not np.any(assignments == c):
                worst = int(costs.argmax())
                centroids[c] = points[worst]
                assignments[worst] = c
                costs[worst] = 0.0
        new_centroids = np.vstack([
            points[assignments == c].mean(axis=0) for c in range(k)
        ])
        movement = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        history.append(float(((points - centroids[assignments]) ** 2).sum()))
        if movement < tol:
            break
    return ClusterSet(
        k=k,
        centroids=centroids,
        assignments=assignments,
        points=points,
        n_iter=n_iter,
        objective_history=tuple(history),
    )


# --------------------------------------------------------------------------
# Convex hull distance


@dataclass(frozen=True, eq=False)
class HullQuery:
    point: np.ndarray
    hull_points: np.ndarray
    tol: float = HULL_TOL
    max_iter: int = HULL_MAX_ITER


def hull_distance(query: HullQuery) -> float:
    return float(
        hull_distances(
            np.asarray(query.point, dtype=float)[None, :],
            np.asarray(query.hull_points, dtype=float),
            tol=query.tol,
            max_iter=query.max_iter,
        )[0]
    )


_CORRECT_EVERY = 32


def _face_correction(q: np.ndarray, P: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Exact minimization of ||lam @ P - q|| over the current support face.

    Wolfe's minor cycle: solve the affine (sign-free) least squares over the
    support, and while any weight is negative, move to the first boundary and
    drop a vertex. Each pass shrinks the support, so it terminates.
    """
    support = np.flatnonzero(lam > 0)
    weights = lam[support]
    while True:
        A = P[support]
        k = len(support)
        kkt = np.empty((k + 1, k + 1))
        kkt[:k, :k] = A @ A.T
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        kkt[k, k] = 0.0
        rhs = np.append(A @ q, 1.0)
        try:
            affine = np.linalg.solve(kkt, rhs)[:k]
        except np.linalg.LinAlgError:
            affine = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]
        if affine.min() >= -1e-12:
            affine = np.maximum(affine, 0.0)
            out = np.zeros(lam.shape)
            out[support] = affine / affine.sum()
            return out
        negative = affine < 0
        theta = min(
            1.0, float((weights[negative] / (weights[negative] - affine[negative])).min())
        )
        weights = (1.0 - theta) * weights + theta * affine
        weights[weights < 1e-15] = 0.0
        if not (weights == 0.0).any():
            weights[affine.argmin()] = 0.0
        if weights.sum() <= 0.0:
            weights[affine.argmax()] = 1.0
        keep = weights > 0
        support, weights = support[keep], weights[keep]
        weights = weights / weights.sum()


def hull_distances(
    queries: np.ndarray,
    hull_points: np.ndarray,
    tol: float = HULL_TOL,
    max_iter: int = HULL_MAX_ITER,
) -> np.ndarray:
    """Distance from each query row to the convex hull of hull_points.

    Away-step Frank-Wolfe over the weight simplex with exact line search
    (the objective is quadratic). All queries iterate together; rows whose
    duality gap certifies the distance to within ~tol drop out. Distances
    at or below tol are clamped to exactly 0. Rows still active every
    _CORRECT_EVERY iterations get an exact solve on their support face,
    which breaks the zigzag AFW falls into on degenerate faces.
    """
    Q = np.asarray(queries, dtype=float)
    P = np.asarray(hull_points, dtype=float)
    if P.ndim != 2 or P.shape[0] == 0:
        raise ValueError("hull_points must be a nonempty 2-D array")
    if Q.ndim != 2 or Q.shape[1] != P.shape[1]:
        raise ValueError("queries must be 2-D with the hull's width")
    nq, m = Q.shape[0], P.shape[0]
    if nq == 0:
        return np.zeros(0)
    if m == 1:
        return np.sqrt(((Q - P[0]) ** 2).sum(axis=1))

    # Center the vertices; gap arithmetic then works at the data's spread
    # rather than its offset, and the duality gap gets an absolute floor at
    # the float64 noise level of that spread.
    center = P.mean(axis=0)
    P = P - center
    Q = Q - center
    spread2 = float((P**2).sum(axis=1).max())
    gap_floor = 64.0 * np.finfo(float).eps * spread2

    # Start each row at its nearest vertex.
    d2 = pairwise_sq_distances(Q, P)
    lam = np.zeros((nq, m))
    lam[np.arange(nq), d2.argmin(axis=1)] = 1.0

    out = np.full(nq, np.nan)
    active = np.arange(nq)
    for it in range(max_iter):
        L = lam[active]
        X = L @ P
        diff = X - Q[active]
        dist = np.sqrt((diff**2).sum(axis=1))
        G = diff @ P.T
        g_dot_lam = (G * L).sum(axis=1)
        fw_idx = G.argmin(axis=1)
        gap = g_dot_lam - G[np.arange(len(active)), fw_idx]

        done = gap <= np.maximum(np.maximum(tol * tol / 4.0, tol * dist / 4.0), gap_floor)
        if np.any(done):
            rows = active[done]
            out[rows] = np.where(dist[done] <= tol, 0.0, dist[done])
            keep = ~done
            active = active[keep]
            if active.size == 0:
                break
            L, X, diff, dist = L[keep], X[keep], diff[keep], dist[keep]
            G, g_dot_lam, fw_idx, gap = G[keep], g_dot_lam[keep], fw_idx[keep], gap[keep]

        na = len(active)
        rows = np.arange(na)
        G_masked = np.where(L > 0, G, -np.inf)
        away_idx = G_masked.argmax(axis=1)
        gap_away = G[rows, away_idx] - g_dot_lam
        use_fw = gap >= gap_away

        # Direction in point space and maximum step per row.
        V = np.where(use_fw[:, None], P[fw_idx] - X, X - P[away_idx])
        lam_away = L[rows, away_idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            gamma_max = np.where(
                use_fw, 1.0, np.where(lam_away < 1.0, lam_away / (1.0 - lam_away), np.inf)
            )
        vv = (V**2).sum(axis=1)
        numer = -(diff * V).sum(axis=1)
        gamma = np.where(vv > 0, numer / np.maximum(vv, 1e-300), 0.0)
        gamma = np.clip(gamma, 0.0, gamma_max)

        scale = np.where(use_fw, 1.0 - gamma, 1.0 + gamma)
        lam_new = L * scale[:, None]
        lam_new[rows, np.where(use_fw, fw_idx, away_idx)] += np.where(use_fw, gamma, -gamma)
        np.maximum(lam_new, 0.0, out=lam_new)
        lam_new /= lam_new.sum(axis=1, keepdims=True)
        lam[active] = lam_new

        if it % _CORRECT_EVERY == _CORRECT_EVERY - 1:
            for row in active:
                lam[row] = _face_correction(Q[row], P, lam[row])
    if active.size:
        raise ConvergenceError(
            f"hull distance did not converge for {active.size} queries "
            f"(worst duality gap {float(gap.max()):.3e})"
        )
    return out


def pairwise_sq_distances(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (n_queries, n_points), via the GEMM form."""
    Q = np.asarray(queries, dtype=float)
    P = np.asarray(points, dtype=float)
    d2 = (Q**2).sum(axis=1)[:, None] + (P**2).sum(axis=1)[None, :] - 2.0 * (Q @ P.T)
    return np.maximum(d2, 0.0, out=d2)


def nearest_point_distances(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Euclidean distance from each query to its nearest row of points."""
    Q = np.asarray(queries, dtype=float)
    P = np.asarray(points, dtype=float)
    if P.shape[0] == 0:
        raise ValueError("points must be nonempty")
    out = np.empty(Q.shape[0])
    # Chunk the query side so the pairwise block stays modest.
    step = max(1, int(4_000_000 / max(P.shape[0], 1)))
    for start in range(0, Q.shape[0], step):
        d2 = pairwise_sq_distances(Q[start : start + step], P)
        out[start : start + step] = np.sqrt(d2.min(axis=1))
    return out


def ball_counts(
    center: np.ndarray,
    radius: float,
    points: np.ndarray,
    labels: np.ndarray,
) -> tuple[int, int]:
    """Closed-ball counts of (positive, negative) labeled points."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    center = np.asarray(center, dtype=float)
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    inside = ((points - center) ** 2).sum(axis=1) <= radius * radius
    n_pos = int(np.count_nonzero(inside & labels))
    n_neg = int(np.count_nonzero(inside & ~labels))
    return n_pos, n_neg
