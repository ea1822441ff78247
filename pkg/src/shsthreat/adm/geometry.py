"""Planar primitives and the ray-casting membership test used by the ADM."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import DegenerateGeometry

# Boundary tolerance, relative to a polygon's extent.
EPS_GEOM = 1e-9


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float


@dataclass(frozen=True)
class LineSegment:
    """Edge with endpoints ordered so that ``yb >= ya``."""

    xa: float
    ya: float
    xb: float
    yb: float

    def __post_init__(self):
        if self.yb < self.ya:
            xa, ya, xb, yb = self.xb, self.yb, self.xa, self.ya
            object.__setattr__(self, "xa", xa)
            object.__setattr__(self, "ya", ya)
            object.__setattr__(self, "xb", xb)
            object.__setattr__(self, "yb", yb)

    @property
    def horizontal(self) -> bool:
        return self.ya == self.yb

    def in_range(self, y: float) -> bool:
        return self.ya < y <= self.yb

    def left_coefficients(self) -> tuple[float, float, float]:
        """``(cx, cy, c0)`` with ``cx*x + cy*y + c0 > 0`` iff (x, y) is strictly left of a -> b."""
        return (-(self.yb - self.ya), self.xb - self.xa,
                (self.yb - self.ya) * self.xa - (self.xb - self.xa) * self.ya)

    def left_of(self, x: float, y: float) -> bool:
        return (self.xb - self.xa) * (y - self.ya) - (self.yb - self.ya) * (x - self.xa) > 0

    def intersect(self, x: float, y: float) -> bool:
        """Whether the ray from (x, y) towards +x crosses this segment."""
        return self.in_range(y) and self.left_of(x, y)


class Polygon:
    """Simple closed polygon given by its vertex ring (no repeated closing vertex)."""

    __slots__ = ("vertices", "_segments")

    def __init__(self, vertices, check: bool = True):
        v = np.array(vertices, dtype=float).reshape(-1, 2)
        if len(v) > 1 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if check:
            if len(v) < 3:
                raise DegenerateGeometry("a polygon needs at least 3 vertices")
            if not np.all(np.isfinite(v)):
                raise DegenerateGeometry("non-finite vertex")
            if abs(signed_area(v)) == 0.0:
                raise DegenerateGeometry("zero-area polygon")
            if not is_simple(v):
                raise DegenerateGeometry("polygon is self-intersecting")
        v.setflags(write=False)
        self.vertices = v
        self._segments = None

    def __len__(self):
        return len(self.vertices)

    def __eq__(self, other):
        return isinstance(other, Polygon) and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash(self.vertices.tobytes())

    def __repr__(self):
        return f"Polygon({len(self.vertices)} vertices)"

    @property
    def segments(self) -> list[LineSegment]:
        if self._segments is None:
            v = self.vertices
            nxt = np.roll(v, -1, axis=0)
            self._segments = [LineSegment(float(a[0]), float(a[1]), float(b[0]), float(b[1]))
                              for a, b in zip(v, nxt)]
        return self._segments

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @property
    def band(self) -> float:
        x0, y0, x1, y1 = self.bounds
        return EPS_GEOM * max(x1 - x0, y1 - y0)

    def contains(self, xs, ys) -> np.ndarray:
        """Vectorised :func:`within_cluster`."""
        return kernels.points_in_polygon(xs, ys, self.vertices[:, 0], self.vertices[:, 1], self.band)

    def edge_distance(self, xs, ys) -> np.ndarray:
        return kernels.min_edge_distance(xs, ys, self.vertices[:, 0], self.vertices[:, 1])

    @classmethod
    def box(cls, x0, y0, x1, y1) -> "Polygon":
        return cls([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def within_cluster(p: Point2D, poly: Polygon) -> bool:
    """Odd number of ray crossings, or within the boundary band of an edge."""
    inside = False
    for seg in poly.segments:
        inside ^= seg.intersect(p.x, p.y)
    if inside:
        return True
    return bool(poly.edge_distance(np.array([p.x]), np.array([p.y]))[0] <= poly.band)


def signed_area(v) -> float:
    v = np.asarray(v, dtype=float)
    v = v - v[0]  # translate first so tiny rings far from the origin keep their area
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _orient(ax, ay, bx, by, cx, cy):
    return np.sign((bx - ax) * (cy - ay) - (by - ay) * (cx - ax))


def segments_intersect(p1, p2, q1, q2) -> np.ndarray:
    """Closed-segment intersection, broadcasting over leading dimensions."""
    p1, p2, q1, q2 = (np.asarray(a, dtype=float) for a in (p1, p2, q1, q2))
    o1 = _orient(p1[..., 0], p1[..., 1], p2[..., 0], p2[..., 1], q1[..., 0], q1[..., 1])
    o2 = _orient(p1[..., 0], p1[..., 1], p2[..., 0], p2[..., 1], q2[..., 0], q2[..., 1])
    o3 = _orient(q1[..., 0], q1[..., 1], q2[..., 0], q2[..., 1], p1[..., 0], p1[..., 1])
    o4 = _orient(q1[..., 0], q1[..., 1], q2[..., 0], q2[..., 1], p2[..., 0], p2[..., 1])
    general = (o1 != o2) & (o3 != o4) & (o1 * o2 <= 0) & (o3 * o4 <= 0)

    def on_seg(a, b, c):
        return ((np.minimum(a[..., 0], b[..., 0]) <= c[..., 0]) & (c[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
                & (np.minimum(a[..., 1], b[..., 1]) <= c[..., 1]) & (c[..., 1] <= np.maximum(a[..., 1], b[..., 1])))

    special = (((o1 == 0) & on_seg(p1, p2, q1)) | ((o2 == 0) & on_seg(p1, p2, q2))
               | ((o3 == 0) & on_seg(q1, q2, p1)) | ((o4 == 0) & on_seg(q1, q2, p2)))
    return general | special


def is_simple(v) -> bool:
    """True when no two edges of the ring meet except adjacent ones at their shared vertex."""
    v = np.asarray(v, dtype=float)
    m = len(v)
    if m < 3:
        return False
    if len(np.unique(v, axis=0)) != m:
        return False
    a = v
    b = np.roll(v, -1, axis=0)
    i, j = np.triu_indices(m, k=1)
    hit = segments_intersect(a[i], b[i], a[j], b[j])
    adjacent = (j == i + 1) | ((i == 0) & (j == m - 1))
    if np.any(hit & ~adjacent):
        return False
    # adjacent edges may only share their common vertex: reject folding back
    e1 = b - a
    e2 = np.roll(e1, -1, axis=0)
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    dot = e1[:, 0] * e2[:, 0] + e1[:, 1] * e2[:, 1]
    return not np.any((cross == 0) & (dot < 0))
