"""Lloyd's k-means with spread seeding, and silhouette-based choice of k."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class ClusteringError(ValueError):
    pass


@dataclass
class Clustering:
    k: int
    centroids: np.ndarray
    assignment: np.ndarray  # cluster index per input point
    sse: float
    iterations: int
    seed: int
    sse_history: list[float] = field(default_factory=list, repr=False)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _spread_seed(points: np.ndarray, weights: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """First centre drawn by weight, each next one with probability proportional to weight * D^2."""
    chosen = [int(rng.choice(len(points), p=weights / weights.sum()))]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        mass = weights * d2
        total = mass.sum()
        if total <= 0:
            # every remaining point coincides with a centre; cannot happen with k <= distinct points
            raise ClusteringError("ran out of distinct points while seeding")
        nxt = int(rng.choice(len(points), p=mass / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((points - points[nxt]) ** 2).sum(axis=1))
    return points[chosen].copy()


def kmeans(
    points,
    k: int,
    seed: int = 0,
    tol: float = 1e-6,
    max_iter: int = 300,
) -> Clustering:
    """Cluster ``points`` (n x d) into ``k`` groups.

    Identical points are merged and carried as weights, so duplicating the
    whole data set reproduces the same centroids. Iteration stops when the
    assignment is stable or the largest centroid move falls below ``tol``
    times the data's spread; SSE is checked to be non-increasing at every
    step. The returned assignment is nearest-centroid for the returned
    centroids.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ClusteringError("points must be a nonempty 2-d array")
    if k < 1:
        raise ClusteringError("k must be >= 1")
    distinct, inverse, counts = np.unique(X, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    if k > len(distinct):
        raise ClusteringError(f"k={k} exceeds the {len(distinct)} distinct points")
    w = counts.astype(float)
    spread = float(np.sqrt((w[:, None] * (distinct - np.average(distinct, axis=0, weights=w)) ** 2).sum() / w.sum()))
    threshold = tol * (spread if spread > 0 else 1.0)

    rng = np.random.default_rng(seed)
    centroids = _spread_seed(distinct, w, k, rng)
    labels = np.full(len(distinct), -1)
    history: list[float] = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = _sq_dists(distinct, centroids)
        new_labels = d2.argmin(axis=1)
        sse = float((w * d2[np.arange(len(distinct)), new_labels]).sum())
        if history and sse > history[-1] * (1 + 1e-12) + 1e-12:
            raise AssertionError(f"SSE rose from {history[-1]} to {sse} at iteration {iterations}")
        history.append(sse)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        moved = centroids.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                moved[j] = np.average(distinct[members], axis=0, weights=w[members])
        shift = float(np.sqrt(((moved - centroids) ** 2).sum(axis=1)).max())
        centroids = moved
        if shift < threshold:
            break

    d2 = _sq_dists(distinct, centroids)
    labels = d2.argmin(axis=1)
    sse = float((w * d2[np.arange(len(distinct)), labels]).sum())
    if sse > history[-1] * (1 + 1e-12) + 1e-12:
        raise AssertionError("SSE rose on the final assignment")
    history.append(sse)
    return Clustering(k, centroids, labels[inverse], sse, iterations, seed, history)


def silhouette_samples(points, assignment) -> np.ndarray:
    """Per-point silhouette (b - a) / max(a, b); points alone in their cluster score 0."""
    X = np.asarray(points, dtype=float)
    labels = np.asarray(assignment)
    clusters = np.unique(labels)
    if len(clusters) < 2:
        raise ClusteringError("silhouette needs at least two clusters")
    sq = (X**2).sum(axis=1)
    D = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0))
    np.fill_diagonal(D, 0.0)
    n = len(X)
    a = np.zeros(n)
    b = np.full(n, np.inf)
    sizes = {c: int((labels == c).sum()) for c in clusters}
    for c in clusters:
        members = labels == c
        sums = D[:, members].sum(axis=1)
        own = labels == c
        if sizes[c] > 1:
            a[own] = sums[own] / (sizes[c] - 1)
        b[~own] = np.minimum(b[~own], sums[~own] / sizes[c])
    alone = np.array([sizes[c] == 1 for c in labels])
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s[alone] = 0.0
    return s


def silhouette_score(points, assignment) -> float:
    return float(silhouette_samples(points, assignment).mean())


def best_of(points, k: int, seed: int = 0, n_init: int = 10, **kmeans_kwargs) -> Clustering:
    """Lowest-SSE clustering over ``n_init`` starts with seeds spawned from ``seed``."""
    if n_init < 1:
        raise ClusteringError("n_init must be >= 1")
    seeds = [seed] + [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n_init - 1)]
    best: Clustering | None = None
    for s in seeds:
        c = kmeans(points, k, seed=s, **kmeans_kwargs)
        if best is None or c.sse < best.sse:
            best = c
    assert best is not None
    return best


def choose_k(
    points, k_range, seed: int = 0, n_init: int = 10, **kmeans_kwargs
) -> tuple[int, float, dict[int, float]]:
    """Pick the k with the highest mean silhouette; ties go to the smaller k.

    Each k is scored on its best-of-``n_init`` clustering, so one unlucky
    start cannot hide real structure. Returns (k, score, score per k) so
    callers can reject weak structure.
    """
    X = np.asarray(points, dtype=float)
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 2 or ks[-1] > len(X) - 1:
        raise ClusteringError(f"k range {ks} must lie within [2, {len(X) - 1}]")
    scores: dict[int, float] = {}
    for k in ks:
        c = best_of(X, k, seed=seed, n_init=n_init, **kmeans_kwargs)
        scores[k] = silhouette_score(X, c.assignment) if len(np.unique(c.assignment)) > 1 else -1.0
        logger.debug("k=%d silhouette=%.4f", k, scores[k])
    best = max(ks, key=lambda k: (scores[k], -k))
    return best, scores[best], scores
