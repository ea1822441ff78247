"""k-nearest-neighbour concave hull (Moreira & Santos) with convex fallback."""
from __future__ import annotations

import math

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from .. import kernels
from ..errors import DegenerateGeometry
from .clustering import as_points
from .geometry import EPS_GEOM, Polygon, is_simple, segments_intersect

# after this many unit steps k grows geometrically; the last attempt is always n - 1
_LINEAR_STEPS = 12


def is_degenerate(pts: np.ndarray) -> bool:
    """Fewer than three distinct points, or all of them collinear."""
    u = np.unique(pts, axis=0)
    if len(u) < 3:
        return True
    c = u - u.mean(axis=0)
    s = np.linalg.svd(c, compute_uv=False)
    return s[1] <= 1e-12 * max(s[0], 1e-300)


def concave_hull(points, k_start: int = 3) -> Polygon:
    pts = np.unique(as_points(points), axis=0)
    idx = concave_hull_indices(pts, k_start)
    return Polygon(pts[idx], check=False)


def concave_hull_indices(pts: np.ndarray, k_start: int = 3) -> np.ndarray:
    """Vertex indices (counter-clockwise) of a simple polygon enclosing ``pts``.

    ``pts`` must hold distinct points. k grows from ``k_start`` until the
    traced ring is simple and contains every point (inside or on the
    boundary); at k = n - 1 the convex hull is returned.
    """
    pts = np.asarray(pts, dtype=float)
    n = len(pts)
    if n < 3 or is_degenerate(pts):
        raise DegenerateGeometry("need at least 3 non-collinear points")
    if n == 3:
        return _ccw(pts, np.arange(3))
    tree = cKDTree(pts)
    extent = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
    band = EPS_GEOM * extent
    for k in _k_schedule(max(3, k_start), n - 1):
        ring = _trace(pts, tree, k)
        if ring is None or len(ring) < 3:
            continue
        v = pts[ring]
        if not is_simple(v):
            continue
        if np.all(kernels.points_in_polygon(pts[:, 0], pts[:, 1], v[:, 0], v[:, 1], band)):
            return _ccw(pts, ring)
    return convex_hull_indices(pts)


def _k_schedule(k0, k_max):
    k = k0
    steps = 0
    while k < k_max:
        yield k
        steps += 1
        k = k + 1 if steps < _LINEAR_STEPS else max(k + 1, int(math.ceil(k * 1.5)))


def convex_hull_indices(pts: np.ndarray) -> np.ndarray:
    return _ccw(pts, ConvexHull(pts).vertices)


def _ccw(pts, ring):
    ring = np.asarray(ring, dtype=np.int64)
    v = pts[ring]
    area = np.dot(v[:, 0], np.roll(v[:, 1], -1)) - np.dot(np.roll(v[:, 0], -1), v[:, 1])
    return ring if area > 0 else ring[::-1].copy()


def _trace(pts, tree, k):
    n = len(pts)
    first = int(np.lexsort((pts[:, 0], pts[:, 1]))[0])  # lowest y, then lowest x
    avail = np.ones(n, dtype=bool)
    avail[first] = False
    hull = [first]
    current = first
    heading = np.array([1.0, 0.0])  # as if the walk arrived heading +x
    step = 2
    while True:
        if step == 5:
            avail[first] = True
        cand = _k_nearest(pts, tree, current, k, avail)
        if len(cand) == 0:
            return None
        # order by counter-clockwise angle measured from the way back
        back = -heading
        d = pts[cand] - pts[current]
        ang = np.arctan2(d[:, 1], d[:, 0]) - math.atan2(back[1], back[0])
        ang = np.mod(ang, 2 * np.pi)
        ang[ang == 0] = 2 * np.pi
        order = np.lexsort((cand, ang))
        chosen = None
        hv = pts[hull]
        for c in cand[order]:
            closing = c == first
            if _crosses(hv, pts[current], pts[c], closing):
                continue
            chosen = int(c)
            break
        if chosen is None:
            return None
        if chosen == first:
            return np.array(hull, dtype=np.int64)
        heading = pts[chosen] - pts[current]
        hull.append(chosen)
        avail[chosen] = False
        current = chosen
        step += 1
        if not avail.any():
            return None


def _crosses(hv, p, q, closing):
    """Does the new edge p -> q meet an existing hull edge other than its neighbours?"""
    m = len(hv)
    if m < 3:
        return False
    a = hv[:-1]
    b = hv[1:]
    # the last existing edge ends at p; when closing, the first edge starts at q
    hi = m - 2
    lo = 1 if closing else 0
    if hi <= lo:
        return False
    hit = segments_intersect(a[lo:hi], b[lo:hi], p[None, :], q[None, :])
    return bool(np.any(hit))


def _k_nearest(pts, tree, i, k, avail):
    want = k
    n = len(pts)
    while True:
        q = min(n, want + 1 + int((~avail).sum()))
        dist, idx = tree.query(pts[i], k=q)
        idx = np.atleast_1d(idx)
        dist = np.atleast_1d(dist)
        ok = (idx < n) & (idx != i)
        ok[ok] = avail[idx[ok]]
        sel = idx[ok][:k]
        if len(sel) >= k or q >= n:
            return sel
        want *= 2
