"""Independent oracles and random instance generators shared by several test modules."""
import numpy as np
from shapely.geometry import Point
from shapely.geometry import Polygon as ShapelyPolygon


def random_simple_polygon(rng, n_min=3, n_max=40):
    """Star-shaped ring around the origin: sorted angles with random radii, then scaled and shifted."""
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
        if np.min(np.diff(np.concatenate([ang, ang[:1] + 2 * np.pi]))) < 1e-3:
            continue
        r = rng.uniform(0.2, 1.0, n)
        scale = 10 ** rng.uniform(-1, 2)
        shift = rng.uniform(-100, 100, 2)
        v = np.column_stack([r * np.cos(ang), r * np.sin(ang)]) * scale + shift
        if ShapelyPolygon(v).is_valid and ShapelyPolygon(v).area > 0:
            return v


def crossing_number(vertices, x, y):
    """Textbook even-odd ray cast towards +x, written independently of the package."""
    v = np.asarray(vertices, dtype=float)
    inside = False
    n = len(v)
    for i in range(n):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside


def shapely_inside(vertices, x, y):
    return ShapelyPolygon(vertices).contains(Point(x, y))


def boundary_distance(vertices, x, y):
    return ShapelyPolygon(vertices).exterior.distance(Point(x, y))


def brute_force_dbscan(points, eps, min_points):
    """O(n^2) DBSCAN with the same conventions: self counts, d <= eps, discovery-order cluster ids."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    nbrs = [np.flatnonzero(d2[i] <= eps * eps) for i in range(n)]
    core = np.array([len(nb) >= min_points for nb in nbrs])
    labels = np.full(n, -2)
    cid = 0
    for i in range(n):
        if labels[i] != -2 or not core[i]:
            continue
        labels[i] = cid
        queue = list(nbrs[i])
        while queue:
            q = queue.pop(0)
            if labels[q] == -2 or labels[q] == -1:
                fresh = labels[q] == -2
                labels[q] = cid
                if fresh and core[q]:
                    queue.extend(nbrs[q])
        cid += 1
    labels[labels == -2] = -1
    return labels


def same_partition(a, b):
    """Equal up to renaming of cluster ids (noise must match exactly)."""
    a, b = np.asarray(a), np.asarray(b)
    if not np.array_equal(a == -1, b == -1):
        return False
    mapping = {}
    for x, y in zip(a, b):
        if x == -1:
            continue
        if mapping.setdefault(x, y) != y:
            return False
    return len(set(mapping.values())) == len(mapping)


def batch_env(definitions, env):
    """Fill defined variables from arrays of free ones, in definition order."""
    from shsthreat.cir import Linear, NonZero, ReluOf
    out = dict(env)
    for name, d in definitions.items():
        if isinstance(d, Linear):
            v = np.full(len(next(iter(env.values()))), d.const)
            for n, c in d.terms:
                v = v + c * out[n]
            out[name] = v
        elif isinstance(d, ReluOf):
            out[name] = np.maximum(out[d.pre], 0.0)
        elif isinstance(d, NonZero):
            out[name] = out[d.var] != 0
    return out


def segment_distance(vertices, xs, ys):
    """Distance from each query point to the polygon's boundary, by projecting onto every edge."""
    v = np.asarray(vertices, dtype=float)
    a, b = v, np.roll(v, -1, axis=0)
    px, py = np.asarray(xs, dtype=float)[:, None], np.asarray(ys, dtype=float)[:, None]
    ex, ey = (b - a)[:, 0], (b - a)[:, 1]
    t = ((px - a[:, 0]) * ex + (py - a[:, 1]) * ey) / (ex * ex + ey * ey)
    t = np.clip(t, 0.0, 1.0)
    dx, dy = px - (a[:, 0] + t * ex), py - (a[:, 1] + t * ey)
    return np.sqrt(dx * dx + dy * dy).min(axis=1)
