"""Pure numpy/scipy implementations of the hot kernels.

Each function mirrors one in ``_ckernels.pyx`` and must return identical
results; ``kernels`` picks the compiled version when it is importable.
"""
import numpy as np
from scipy.spatial import cKDTree

NOISE = -1


def points_in_polygon(px, py, vx, vy, band):
    """Containment of points in the closed ring ``(vx, vy)``.

    A point is inside when it lies within ``band`` of an edge, otherwise
    when a ray cast towards +x crosses an odd number of edges. An edge
    (lower endpoint a, upper endpoint b) is crossed iff ``ya < y <= yb`` and
    the point is strictly left of the directed edge a -> b.
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    vx = np.asarray(vx, dtype=float)
    vy = np.asarray(vy, dtype=float)
    m = len(vx)
    inside = np.zeros(px.shape, dtype=bool)
    near = np.zeros(px.shape, dtype=bool)
    for i in range(m):
        x1, y1 = vx[i], vy[i]
        x2, y2 = vx[(i + 1) % m], vy[(i + 1) % m]
        if y1 <= y2:
            xa, ya, xb, yb = x1, y1, x2, y2
        else:
            xa, ya, xb, yb = x2, y2, x1, y1
        cross = (xb - xa) * (py - ya) - (yb - ya) * (px - xa)
        inside ^= (ya < py) & (py <= yb) & (cross > 0)
        if band > 0:
            near |= _seg_dist2(px, py, xa, ya, xb, yb) <= band * band
    return inside | near


def _seg_dist2(px, py, xa, ya, xb, yb):
    dx, dy = xb - xa, yb - ya
    L2 = dx * dx + dy * dy
    if L2 == 0:
        return (px - xa) ** 2 + (py - ya) ** 2
    t = np.clip(((px - xa) * dx + (py - ya) * dy) / L2, 0.0, 1.0)
    ex = px - (xa + t * dx)
    ey = py - (ya + t * dy)
    return ex * ex + ey * ey


def min_edge_distance(px, py, vx, vy):
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    m = len(vx)
    best = np.full(px.shape, np.inf)
    for i in range(m):
        j = (i + 1) % m
        best = np.minimum(best, _seg_dist2(px, py, vx[i], vy[i], vx[j], vy[j]))
    return np.sqrt(best)


def dbscan_labels(points, eps, min_points):
    """Textbook DBSCAN in input order; ``NOISE`` marks unclustered points.

    The neighbourhood of a point includes the point itself and every point
    at Euclidean distance <= eps. Clusters are numbered in discovery order
    and a border point joins the first cluster that reaches it.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return labels
    tree = cKDTree(pts)
    neigh = tree.query_ball_point(pts, r=eps * (1 + 1e-9), p=2.0)
    # cKDTree's radius test can differ from the exact <= in the last ulp
    neigh = [_exact_filter(pts, i, nb, eps) for i, nb in enumerate(neigh)]
    core = np.array([len(nb) >= min_points for nb in neigh])
    cluster = 0
    for i in range(n):
        if labels[i] != NOISE or not core[i]:
            continue
        labels[i] = cluster
        stack = [i]
        while stack:
            q = stack.pop()
            for r in neigh[q]:
                if labels[r] == NOISE:
                    labels[r] = cluster
                    if core[r]:
                        stack.append(r)
        cluster += 1
    return labels


def _exact_filter(pts, i, nb, eps):
    if not nb:
        return nb
    nb = np.array(sorted(nb))
    d = pts[nb] - pts[i]
    return nb[(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]) <= eps * eps].tolist()


def gini_best_split(x_sorted, y_sorted, n_classes, min_leaf):
    """Best threshold on one feature by weighted Gini impurity.

    Inputs are the feature values and labels sorted by value. Candidate
    thresholds are midpoints between consecutive distinct values that leave
    at least ``min_leaf`` samples on each side. Returns
    ``(weighted_gini, threshold, n_left)`` or ``(inf, nan, 0)``.
    """
    x = np.asarray(x_sorted, dtype=float)
    y = np.asarray(y_sorted, dtype=np.int64)
    n = len(x)
    if n < 2:
        return np.inf, np.nan, 0
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]  # counts for split after position i
    total = left[-1] + onehot[-1]
    right = total - left
    nl = np.arange(1, n, dtype=float)
    nr = n - nl
    gl = 1.0 - np.sum(left * left, axis=1) / (nl * nl)
    gr = 1.0 - np.sum(right * right, axis=1) / (nr * nr)
    score = (nl * gl + nr * gr) / n
    valid = (x[1:] > x[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not valid.any():
        return np.inf, np.nan, 0
    score = np.where(valid, score, np.inf)
    k = int(np.argmin(score))  # first minimum -> lowest threshold on ties
    thr = 0.5 * (x[k] + x[k + 1])
    if not x[k] <= thr < x[k + 1]:
        thr = x[k]
    return float(score[k]), float(thr), k + 1
