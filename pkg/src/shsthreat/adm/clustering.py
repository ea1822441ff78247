"""DBSCAN, K-means and the internal cluster-validation metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .. import kernels
from ..errors import InvalidParam, TooFewClusters, TooFewPoints

NOISE = kernels.NOISE


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    labels: np.ndarray  # cluster id per point, NOISE for unclustered
    centroids: np.ndarray | None = None
    params: dict | None = None

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) and self.labels.max() >= 0 else 0

    @property
    def noise_fraction(self) -> float:
        return float(np.mean(self.labels == NOISE)) if len(self.labels) else 0.0


def as_points(points) -> np.ndarray:
    if len(points) and hasattr(points[0], "x"):
        return np.array([(p.x, p.y) for p in points], dtype=float)
    return np.asarray(points, dtype=float).reshape(-1, 2)


def dbscan(points, epsilon: float, min_points: int) -> ClusteringResult:
    if not epsilon > 0:
        raise InvalidParam(f"epsilon must be > 0, got {epsilon}")
    if min_points < 1:
        raise InvalidParam(f"min_points must be >= 1, got {min_points}")
    pts = as_points(points)
    if not np.all(np.isfinite(pts)):
        raise InvalidParam("points must be finite")
    labels = kernels.dbscan_labels(pts, float(epsilon), int(min_points))
    return ClusteringResult(labels, None, {"epsilon": float(epsilon), "min_points": int(min_points)})


def kmeans(points, k: int, seed: int, max_iter: int = 500) -> ClusteringResult:
    """Lloyd iterations from a seeded farthest-point start.

    The first centre is a random input point, each further centre is the
    point farthest from the centres chosen so far (lowest index on ties).
    Iteration stops once assignments no longer change; the returned centroids
    are the means of the final clusters.
    """
    pts = as_points(points)
    n = len(pts)
    if k < 1:
        raise InvalidParam("k must be >= 1")
    if n < k:
        raise TooFewPoints(f"{n} points cannot form {k} clusters")
    rng = np.random.default_rng(seed)
    centres = [pts[int(rng.integers(n))]]
    dmin = np.linalg.norm(pts - centres[0], axis=1)
    for _ in range(1, k):
        i = int(np.argmax(dmin))
        centres.append(pts[i])
        dmin = np.minimum(dmin, np.linalg.norm(pts - pts[i], axis=1))
    C = np.array(centres, dtype=float)

    assign = None
    for _ in range(max_iter):
        new = np.argmin(cdist(pts, C), axis=1)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for c in range(len(C)):
            members = pts[assign == c]
            if len(members):
                C[c] = members.mean(axis=0)

    # drop empty clusters, renumber contiguously
    used = np.unique(assign)
    remap = np.full(len(C), -1)
    remap[used] = np.arange(len(used))
    labels = remap[assign]
    C = np.array([pts[labels == c].mean(axis=0) for c in range(len(used))])
    return ClusteringResult(labels.astype(np.int64), C, {"k": int(k), "seed": int(seed)})


def clustering_metrics(points, result: ClusteringResult) -> dict:
    """Silhouette (SCS), Davies-Bouldin (DBS) and Dunn index (DI); noise excluded."""
    pts = as_points(points)
    keep = result.labels != NOISE
    X, lab = pts[keep], result.labels[keep]
    ids = np.unique(lab)
    if len(ids) < 2:
        raise TooFewClusters("metrics need at least two clusters")
    D = cdist(X, X)
    n = len(X)

    sil = np.zeros(n)
    sizes = {c: int(np.sum(lab == c)) for c in ids}
    mean_to = np.column_stack([D[:, lab == c].mean(axis=1) for c in ids])
    col = {c: i for i, c in enumerate(ids)}
    for i in range(n):
        c = lab[i]
        if sizes[c] == 1:
            continue  # silhouette of a singleton is 0
        a = D[i, lab == c].sum() / (sizes[c] - 1)
        b = min(mean_to[i, col[o]] for o in ids if o != c)
        sil[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0

    cents = np.array([X[lab == c].mean(axis=0) for c in ids])
    scatter = np.array([np.linalg.norm(X[lab == c] - cents[i], axis=1).mean() for i, c in enumerate(ids)])
    cd = cdist(cents, cents)
    R = np.zeros((len(ids), len(ids)))
    for i in range(len(ids)):
        for j in range(len(ids)):
            if i != j:
                R[i, j] = (scatter[i] + scatter[j]) / cd[i, j] if cd[i, j] > 0 else np.inf
    dbs = float(np.mean(R.max(axis=1)))

    same = lab[:, None] == lab[None, :]
    inter = D[~same].min()
    intra = D[same].max()
    di = float(inter / intra) if intra > 0 else float("inf")
    return {"SCS": float(sil.mean()), "DBS": dbs, "DI": di}
