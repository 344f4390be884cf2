"""Baseline clusterers and the Rand index.

The baselines are deliberately plain: Lloyd's k-means with seeded
random-point starts, textbook DBSCAN, and single-linkage agglomeration.
They exist to compare against sum-of-norms clustering on the same inputs,
in both the original and the re-embedded coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import rng_for
from .errors import InputError
from .son import ClusterAssignment, _as_data


@dataclass(frozen=True)
class KMeansParams:
    k: int
    max_iters: int = 100
    restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise InputError(f"k must be >= 1, got {self.k}")
        if self.max_iters < 1 or self.restarts < 1:
            raise InputError("max_iters and restarts must be >= 1")


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_pts: int

    def __post_init__(self):
        if self.eps <= 0:
            raise InputError(f"eps must be positive, got {self.eps}")
        if self.min_pts < 1:
            raise InputError(f"min_pts must be >= 1, got {self.min_pts}")


@dataclass(frozen=True)
class SingleLinkageParams:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise InputError(f"k must be >= 1, got {self.k}")


BaselineParams = KMeansParams | DbscanParams | SingleLinkageParams


def _pairwise_sq(pts: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", pts, pts)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    return np.maximum(d2, 0.0)


def _relabel_first_occurrence(labels: np.ndarray) -> ClusterAssignment:
    out = np.empty(labels.shape[0], dtype=np.int64)
    mapping: dict[int, int] = {}
    for i, lab in enumerate(labels):
        lab = int(lab)
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return ClusterAssignment(labels=out, n_clusters=len(mapping))


def kmeans(points, params: KMeansParams) -> ClusterAssignment:
    """Lloyd iterations from seeded random-point initialisation.

    Each restart picks k distinct data points as starting centroids (per a
    derived Philox stream), runs Lloyd to a fixed point or max_iters, and
    the restart with the lowest within-cluster sum of squares wins.  Empty
    clusters are re-seeded on the point currently farthest from its
    centroid.
    """
    pts = _as_data(points)
    n = pts.shape[0]
    if params.k > n:
        raise InputError(f"k={params.k} exceeds the number of points {n}")
    best_sse, best_labels = np.inf, None
    for restart in range(params.restarts):
        gen = rng_for(params.seed, restart)
        centers = pts[gen.choice(n, size=params.k, replace=False)].copy()
        labels = np.full(n, -1, dtype=np.int64)
        for _ in range(params.max_iters):
            d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_labels = d2.argmin(axis=1)
            for j in range(params.k):
                members = new_labels == j
                if members.any():
                    centers[j] = pts[members].mean(axis=0)
                else:
                    far = int(d2[np.arange(n), new_labels].argmax())
                    centers[j] = pts[far]
                    new_labels[far] = j
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
        sse = float(((pts - centers[labels]) ** 2).sum())
        if sse < best_sse:
            best_sse, best_labels = sse, labels.copy()
    return _relabel_first_occurrence(best_labels)


def kmeans_sse_trace(points, params: KMeansParams, restart: int = 0) -> np.ndarray:
    """Within-cluster SSE after each Lloyd step of one restart (diagnostics)."""
    pts = _as_data(points)
    n = pts.shape[0]
    gen = rng_for(params.seed, restart)
    centers = pts[gen.choice(n, size=params.k, replace=False)].copy()
    labels = np.full(n, -1, dtype=np.int64)
    trace = []
    for _ in range(params.max_iters):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        for j in range(params.k):
            members = new_labels == j
            if members.any():
                centers[j] = pts[members].mean(axis=0)
            else:
                far = int(d2[np.arange(n), new_labels].argmax())
                centers[j] = pts[far]
                new_labels[far] = j
        trace.append(float(((pts - centers[new_labels]) ** 2).sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return np.asarray(trace)


def dbscan(points, params: DbscanParams) -> ClusterAssignment:
    """Euclidean-ball DBSCAN with core/border/noise semantics.

    Noise points are kept out of every density cluster and then remapped
    to fresh singleton class ids (in point order) so that the result is a
    total partition usable in Rand-index comparisons.
    """
    pts = _as_data(points)
    n = pts.shape[0]
    neigh = _pairwise_sq(pts) <= params.eps * params.eps
    counts = neigh.sum(axis=1)  # includes the point itself
    core = counts >= params.min_pts
    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        stack = [i]
        while stack:
            u = stack.pop()
            if not core[u]:
                continue
            for v in np.where(neigh[u] & (labels == -1))[0]:
                labels[v] = cluster
                stack.append(int(v))
        cluster += 1
    for i in range(n):
        if labels[i] == -1:
            labels[i] = cluster
            cluster += 1
    return ClusterAssignment(labels=labels, n_clusters=cluster)


def single_linkage(points, k: int) -> ClusterAssignment:
    """Agglomerate by minimum single-link distance until k clusters remain.

    Equivalent to cutting the k-1 heaviest edges of the Euclidean minimum
    spanning tree.  Ties in the merge order go to the lexicographically
    first pair.
    """
    pts = _as_data(points)
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise InputError(f"k={k} not in [1, {n}]")
    dist = np.sqrt(_pairwise_sq(pts))
    np.fill_diagonal(dist, np.inf)
    dist[np.tril_indices(n)] = np.inf  # keep one copy per pair, (i < j)
    alive = np.ones(n, dtype=bool)
    members = {i: [i] for i in range(n)}
    for _ in range(n - k):
        flat = int(np.argmin(dist))
        i, j = divmod(flat, n)
        alive[j] = False
        # single link: the new cluster is as close to others as its closer half
        row = np.minimum(
            np.where(np.arange(n) < i, dist[:, i], dist[i, :]),
            np.where(np.arange(n) < j, dist[:, j], dist[j, :]),
        )
        row[~alive] = np.inf
        row[i] = np.inf
        dist[i, :] = np.where(np.arange(n) > i, row, np.inf)
        dist[:, i] = np.where(np.arange(n) < i, row, np.inf)
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        members[i].extend(members.pop(j))
    labels = np.empty(n, dtype=np.int64)
    for root, pts_idx in members.items():
        labels[np.asarray(pts_idx)] = root
    return _relabel_first_occurrence(labels)


def rand_index(a, b) -> float:
    """Fraction of point pairs on which two partitions agree.

    Computed from the contingency table in exact integer arithmetic;
    returns 1.0 for n < 2 (no pairs to disagree on).
    """
    la = a.labels if isinstance(a, ClusterAssignment) else np.asarray(a)
    lb = b.labels if isinstance(b, ClusterAssignment) else np.asarray(b)
    if la.shape != lb.shape or la.ndim != 1:
        raise InputError(f"label vectors must match, got shapes {la.shape} and {lb.shape}")
    n = la.shape[0]
    if n < 2:
        return 1.0
    _, ia = np.unique(la, return_inverse=True)
    _, ib = np.unique(lb, return_inverse=True)
    cont = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(cont, (ia, ib), 1)

    def pairs(x):
        return int((x.astype(object) * (x.astype(object) - 1) // 2).sum())

    total = n * (n - 1) // 2
    same_both = pairs(cont.ravel())
    same_a = pairs(cont.sum(axis=1))
    same_b = pairs(cont.sum(axis=0))
    agree = total + 2 * same_both - same_a - same_b
    return agree / total
