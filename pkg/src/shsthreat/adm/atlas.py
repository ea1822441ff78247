"""Per-(label, sensor pair) cluster boundaries and the consistency check built on them."""
from __future__ import annotations

import itertools
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..data import Dataset, SensorSchema
from ..errors import DegenerateGeometry, InvalidParam, UnknownLabel
from .clustering import NOISE, ClusteringResult, clustering_metrics, dbscan, kmeans
from .geometry import EPS_GEOM, Point2D, Polygon, within_cluster
from .hull import concave_hull_indices, is_degenerate

log = logging.getLogger(__name__)

ATLAS_VERSION = 1


@dataclass(frozen=True)
class AtlasParams:
    algorithm: str = "dbscan"
    # dbscan: fixed values, or None to search
    epsilon: float | None = None
    min_points: int | None = None
    min_points_grid: tuple[int, ...] = (3, 4, 5)
    max_noise_fraction: float = 0.01
    # kmeans: fixed k, or None to pick by silhouette over k_grid
    k: int | None = None
    k_grid: tuple[int, ...] = tuple(range(1, 9))
    hull_k: int = 3
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm, "epsilon": self.epsilon, "min_points": self.min_points,
            "min_points_grid": list(self.min_points_grid), "max_noise_fraction": self.max_noise_fraction,
            "k": self.k, "k_grid": list(self.k_grid), "hull_k": self.hull_k, "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AtlasParams":
        d = dict(d)
        for key in ("min_points_grid", "k_grid"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class AtlasEntry:
    polygons: tuple[Polygon, ...]
    degenerate: tuple[bool, ...]  # per polygon: built as an inflated bounding box
    clustering: dict = field(default_factory=dict)

    @property
    def vacuous(self) -> bool:
        return len(self.polygons) == 0


@dataclass(frozen=True)
class ClusterAtlas:
    schema: SensorSchema
    entries: dict  # (j, a, b) with a < b -> AtlasEntry
    params: AtlasParams = field(default_factory=AtlasParams)
    timings: dict = field(default_factory=dict, compare=False)

    def pairs(self):
        return list(itertools.combinations(range(self.schema.n_s), 2))

    def entry(self, j: int, a: int, b: int) -> AtlasEntry:
        if a > b:
            a, b = b, a
        return self.entries[(j, a, b)]

    def labels(self):
        return sorted({j for j, _, _ in self.entries})

    def to_dict(self) -> dict:
        out = {}
        for (j, a, b), e in sorted(self.entries.items()):
            out[f"{j}/{a}/{b}"] = {
                "polygons": [p.vertices.tolist() for p in e.polygons],
                "degenerate": list(e.degenerate),
                "vacuous": e.vacuous,
                "clustering": e.clustering,
            }
        return {"version": ATLAS_VERSION, "schema": self.schema.to_dict(),
                "params": self.params.to_dict(), "entries": out}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterAtlas":
        if d.get("version") != ATLAS_VERSION:
            raise ValueError(f"unsupported atlas version {d.get('version')!r}")
        entries = {}
        for key, e in d["entries"].items():
            j, a, b = (int(t) for t in key.split("/"))
            polys = tuple(Polygon(v) for v in e["polygons"])
            entries[(j, a, b)] = AtlasEntry(polys, tuple(bool(x) for x in e["degenerate"]),
                                            e.get("clustering", {}))
        return cls(SensorSchema.from_dict(d["schema"]), entries, AtlasParams.from_dict(d["params"]))


# ---------------------------------------------------------------------------
# construction

def _normalise(pts: np.ndarray):
    lo = pts.min(axis=0)
    scale = pts.max(axis=0) - lo
    scale[scale == 0] = 1.0
    return (pts - lo) / scale


def select_dbscan_params(z: np.ndarray, params: AtlasParams) -> tuple[float, int]:
    """Smallest epsilon (then min_points) whose noise fraction meets the bound.

    Candidate epsilons are the 5th..95th percentiles of nearest-neighbour
    distances in normalised coordinates. If no candidate meets the bound the
    one with the least noise wins.
    """
    n = len(z)
    if n < 2:
        return 1.0, 1
    dist, _ = cKDTree(z).query(z, k=2)
    nn = dist[:, 1]
    grid = np.unique(np.percentile(nn, np.arange(5, 96, 10)))
    grid = grid[grid > 0]
    if len(grid) == 0:
        grid = np.array([1e-6])
    # widen with multiples of the 95th percentile so sparse clusters can still connect
    grid = np.concatenate([grid, grid[-1] * np.array([1.5, 2.0, 3.0, 4.0, 6.0, 8.0])])
    best = None
    for eps in grid:
        for mp in params.min_points_grid:
            noise = float(np.mean(dbscan(z, eps, mp).labels == NOISE))
            if noise <= params.max_noise_fraction:
                return float(eps), int(mp)
            if best is None or noise < best[0]:
                best = (noise, float(eps), int(mp))
    return best[1], best[2]


def _cluster(z: np.ndarray, params: AtlasParams) -> ClusteringResult:
    if params.algorithm == "dbscan":
        if params.epsilon is not None and params.min_points is not None:
            eps, mp = params.epsilon, params.min_points
        else:
            eps, mp = select_dbscan_params(z, params)
        return dbscan(z, eps, mp)
    if params.algorithm == "kmeans":
        if params.k is not None:
            return kmeans(z, min(params.k, len(z)), params.seed)
        best, best_score = None, -np.inf
        for k in params.k_grid:
            if k > len(z):
                break
            res = kmeans(z, k, params.seed)
            score = 0.0 if res.n_clusters < 2 else clustering_metrics(z, res)["SCS"]
            if score > best_score:
                best, best_score = res, score
        return best
    raise InvalidParam(f"unknown clustering algorithm {params.algorithm!r}")


def _box(raw: np.ndarray) -> Polygon:
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    pad = EPS_GEOM * max(float(np.max(hi - lo)), float(np.max(np.abs(raw))), 1.0)
    pad = max(pad, 1e-9)
    return Polygon.box(lo[0] - pad, lo[1] - pad, hi[0] + pad, hi[1] + pad)


def build_entry(raw: np.ndarray, params: AtlasParams) -> tuple[AtlasEntry, dict]:
    """Cluster one label's projection onto a sensor pair and outline each cluster."""
    t0 = time.perf_counter()
    if len(raw) == 0:
        return AtlasEntry((), (), {"n_points": 0}), {"clustering": 0.0, "hull": 0.0}
    z = _normalise(raw)
    res = _cluster(z, params)
    t1 = time.perf_counter()
    polys, degen = [], []
    for c in range(res.n_clusters):
        members = res.labels == c
        zc, rc = z[members], raw[members]
        if is_degenerate(rc):
            polys.append(_box(rc))
            degen.append(True)
            continue
        # hull traced in normalised coordinates, vertices taken from the raw points
        zu, first = np.unique(zc, axis=0, return_index=True)
        try:
            ring = concave_hull_indices(zu, params.hull_k)
            poly = Polygon(rc[first[ring]])
            if not np.all(poly.contains(rc[:, 0], rc[:, 1])):
                raise DegenerateGeometry("hull lost points after rescaling")
        except DegenerateGeometry:
            poly = _box(rc)
            degen.append(True)
        else:
            degen.append(False)
        polys.append(poly)
    t2 = time.perf_counter()
    info = dict(res.params or {})
    info.update({"n_points": int(len(raw)), "n_clusters": res.n_clusters,
                 "noise_fraction": res.noise_fraction})
    return AtlasEntry(tuple(polys), tuple(degen), info), {"clustering": t1 - t0, "hull": t2 - t1}


def build_atlas(train: Dataset, algorithm: str = "dbscan", params: AtlasParams | None = None) -> ClusterAtlas:
    if len(train) == 0:
        from ..errors import EmptyDataset
        raise EmptyDataset("cannot build an atlas from an empty dataset")
    params = params or AtlasParams(algorithm=algorithm)
    if params.algorithm != algorithm:
        params = AtlasParams(**{**params.to_dict(), "algorithm": algorithm,
                                "min_points_grid": params.min_points_grid, "k_grid": params.k_grid})
    schema = train.schema
    entries = {}
    timings = {"clustering": 0.0, "hull": 0.0}
    for j in range(schema.n_l):
        Xj = train.X[train.y == j]
        for a, b in itertools.combinations(range(schema.n_s), 2):
            entry, t = build_entry(Xj[:, [a, b]], params)
            entries[(j, a, b)] = entry
            for key in timings:
                timings[key] += t[key]
    return ClusterAtlas(schema, entries, params, timings)


# ---------------------------------------------------------------------------
# consistency

def consistent(P, j: int, atlas: ClusterAtlas) -> bool:
    """Every sensor pair of ``P`` falls inside one of label ``j``'s clusters."""
    P = np.asarray(P, dtype=float)
    if len(P) != atlas.schema.n_s:
        from ..errors import DimensionMismatch
        raise DimensionMismatch(f"expected {atlas.schema.n_s} measurements, got {len(P)}")
    if not 0 <= j < atlas.schema.n_l:
        raise UnknownLabel(f"label {j} not in atlas")
    for a, b in atlas.pairs():
        e = atlas.entry(j, a, b)
        if e.vacuous:
            log.warning("label %d pair (%d, %d) has no clusters; passing vacuously", j, a, b)
            continue
        p = Point2D(float(P[a]), float(P[b]))
        if not any(within_cluster(p, poly) for poly in e.polygons):
            return False
    return True


def consistent_batch(X, j: int, atlas: ClusterAtlas) -> np.ndarray:
    """Vectorised :func:`consistent` over the rows of ``X``."""
    X = np.asarray(X, dtype=float).reshape(-1, atlas.schema.n_s)
    if not 0 <= j < atlas.schema.n_l:
        raise UnknownLabel(f"label {j} not in atlas")
    ok = np.ones(len(X), dtype=bool)
    for a, b in atlas.pairs():
        e = atlas.entry(j, a, b)
        if e.vacuous:
            continue
        hit = np.zeros(len(X), dtype=bool)
        for poly in e.polygons:
            idx = np.flatnonzero(ok & ~hit)
            if len(idx) == 0:
                break
            hit[idx] = poly.contains(X[idx, a], X[idx, b])
        ok &= hit
    return ok


def coverage(dataset: Dataset, atlas: ClusterAtlas) -> float:
    """Fraction of records consistent with the atlas under their own label."""
    if len(dataset) == 0:
        return 0.0
    good = 0
    for j in range(dataset.schema.n_l):
        Xj = dataset.X[dataset.y == j]
        if len(Xj):
            good += int(consistent_batch(Xj, j, atlas).sum())
    return good / len(dataset)
