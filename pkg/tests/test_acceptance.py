"""Acceptance gate: one test per numbered criterion, each reporting a PASS/FAIL line in the summary."""
import time

import numpy as np
import pytest

from conftest import SEED, needs_z3
from helpers import batch_env, brute_force_dbscan, crossing_number, random_simple_polygon, segment_distance
from shsthreat import dcm
from shsthreat.adm.atlas import build_atlas, consistent_batch, coverage
from shsthreat.adm.clustering import dbscan, kmeans
from shsthreat.adm.geometry import Point2D, Polygon, within_cluster
from shsthreat.cir import encode_attack, encode_membership, encode_model, evaluate_batch, measurement_vars
from shsthreat.data import Dataset, SensorSchema
from shsthreat.dcm.neural import loss_and_grad
from shsthreat.solve import builtin_backend, external_backend, solve
from shsthreat.threat import (FEASIBLE, INFEASIBLE, AttackerCapability, attack_matrix, default_ladder,
                              feasibility_grid, find_attack, monotonicity_violations, perturbation_falsification,
                              resiliency, validate_attack)
from shsthreat.threat.attack import _vector

BAND = 1e-6


@pytest.fixture(scope="module")
def full_matrix(dt_model, atlas, baselines):
    t0 = time.perf_counter()
    m = attack_matrix(baselines, default_ladder(8), dt_model, atlas, external_backend(timeout=300))
    return m, time.perf_counter() - t0


def _off_boundary(model, X):
    """Rows at least BAND away from every decision boundary of ``model``."""
    if isinstance(model, dcm.DecisionTreeModel):
        keep = np.ones(len(X), bool)
        for a, thr in model.thresholds():
            keep &= np.abs(X[:, a] - thr) >= BAND
        return keep
    z = np.sort(model.logits(X), axis=1)
    return z[:, -1] - z[:, -2] >= BAND


@pytest.mark.acceptance(1)
def test_encoder_matches_model(record_property, synthetic, dt_model, lr_model, nn_model):
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    lo, hi = synthetic.X.min(0), synthetic.X.max(0)
    X = rng.uniform(lo, hi, size=(10000, 8))
    V = measurement_vars(8)
    disagree = checked = 0
    for model in (dt_model, lr_model, nn_model):
        keep = _off_boundary(model, X)
        Xk = X[keep]
        pred = model.predict_batch(Xk)
        for j in range(model.n_l):
            defs = {}
            e = encode_model(model, V, j, defs)
            env = batch_env(defs, {v: Xk[:, s] for s, v in enumerate(V)})
            disagree += int(np.sum(evaluate_batch(e, env, tol=1e-9) != (pred == j)))
            checked += len(Xk)
    elapsed = time.perf_counter() - t0
    record_property("detail", f"{checked - disagree}/{checked} agree, {elapsed:.1f}s")
    assert disagree == 0
    assert elapsed < 120


@pytest.mark.acceptance(2)
def test_membership_matches_crossing_number(record_property):
    rng = np.random.default_rng(SEED)
    bad = checked = 0
    for _ in range(1000):
        v = random_simple_polygon(rng)
        poly = Polygon(v)
        x0, y0, x1, y1 = poly.bounds
        xs = rng.uniform(x0 - 0.1 * (x1 - x0), x1 + 0.1 * (x1 - x0), 100)
        ys = rng.uniform(y0 - 0.1 * (y1 - y0), y1 + 0.1 * (y1 - y0), 100)
        far = segment_distance(v, xs, ys) > poly.band
        enc = evaluate_batch(encode_membership(poly, "x", "y"), {"x": xs, "y": ys})
        for k in np.flatnonzero(far):
            want = crossing_number(v, xs[k], ys[k])
            bad += (within_cluster(Point2D(xs[k], ys[k]), poly) != want) + (bool(enc[k]) != want)
            checked += 1
    record_property("detail", f"{checked} points off the edge band, {bad} disagreements")
    assert bad == 0


@needs_z3
@pytest.mark.acceptance(3)
def test_every_matrix_witness_validates(record_property, full_matrix, dt_model, atlas):
    m, elapsed = full_matrix
    wit = m.witnesses()
    ok = sum(validate_attack(v, dt_model, atlas) for v in wit)
    statuses = [e.status for e in m.cells.values()]
    record_property("detail", f"{ok}/{len(wit)} witnesses valid; {statuses.count(FEASIBLE)} feasible, "
                              f"{statuses.count(INFEASIBLE)} infeasible of {len(statuses)} goals; {elapsed:.0f}s")
    assert len(m.cells) == 30
    assert ok == len(wit) > 0
    assert elapsed < 600


@needs_z3
@pytest.mark.acceptance(4)
def test_feasibility_is_monotone(record_property, dt_model, atlas, baselines):
    _, rec = baselines[0]
    g = feasibility_grid(rec, 0, dt_model, atlas, external_backend(timeout=300),
                         max_sensors=range(1, 9), thresholds=(0.05, 0.10, 0.15, 0.20, 0.25, 0.30))
    counts, unknown = g.counts(), g.unknown()
    bad = monotonicity_violations(counts, unknown)
    record_property("detail", f"{len(bad)} violations, {int(unknown.sum())} unknown cells, "
                              f"max {counts.max()} at (8, 30%) = {counts[-1, -1]}")
    assert bad == []
    assert counts[-1, -1] == counts.max()


@pytest.mark.acceptance(5)
def test_training_records_pass_consistency(record_property, split, atlas):
    cov = coverage(split[0], atlas)
    record_property("detail", f"training coverage {cov:.3f} (bound 0.75)")
    assert cov >= 0.75


@pytest.mark.acceptance(6)
def test_tree_accuracy_band(record_property, split, dt_model):
    acc = dcm.evaluate(dt_model, split[1]).accuracy
    record_property("detail", f"held-out accuracy {acc:.3f} (bound 0.85)")
    assert acc >= 0.85


@needs_z3
@pytest.mark.acceptance(7)
def test_resiliency_survives_random_perturbation(record_property, full_matrix, dt_model, atlas, baselines):
    m, _ = full_matrix
    backend = external_backend(timeout=300)
    candidates = sorted(((e.capability, j, jb) for (j, jb), e in m.cells.items()
                         if e.status == FEASIBLE and e.capability.max_sensors >= 2),
                        key=lambda c: (c[0].threshold, c[0].max_sensors, c[1], c[2]))
    assert candidates, "no goal needs more than one sensor"
    for cap, j, jb in candidates:
        rec = baselines[j][1]
        rep = resiliency(rec, j, jb, cap.max_sensors, cap.threshold, dt_model, atlas, backend)
        certified = all(s == INFEASIBLE for _, s in rep.certificates[:rep.r])
        if rep.r >= 1 and certified and rep.first_feasible == AttackerCapability(rep.r + 1, cap.threshold):
            break
    else:
        pytest.fail("no goal was certified r-resilient with r >= 1")
    hits = perturbation_falsification(rec, j, jb, AttackerCapability(rep.r, cap.threshold), dt_model, atlas,
                                      trials=10000, seed=SEED)
    record_property("detail", f"label {j} -> {jb} is {rep.r}-resilient at {cap.threshold:g} "
                              f"(sat at {rep.r + 1}); {hits}/10000 perturbations succeed")
    assert validate_attack(rep.vector, dt_model, atlas)
    assert hits == 0


@pytest.mark.acceptance(8)
def test_network_gradient_check(record_property):
    rng = np.random.default_rng(SEED)
    params = [rng.normal(size=(3, 3)), rng.normal(size=3), rng.normal(size=(2, 3)), rng.normal(size=2)]
    Z, y = rng.normal(size=(16, 3)), rng.integers(0, 2, 16)
    _, grads = loss_and_grad(params, Z, y)
    h = 1e-5
    worst = 0.0
    for p, g in zip(params, grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up, _ = loss_and_grad(params, Z, y)
            p[idx] = old - h
            down, _ = loss_and_grad(params, Z, y)
            p[idx] = old
            num = (up - down) / (2 * h)
            worst = max(worst, abs(num - g[idx]) / max(abs(num) + abs(g[idx]), 1e-8))
    record_property("detail", f"max relative error {worst:.2e}")
    assert worst < 1e-4


@pytest.mark.acceptance(9)
def test_clustering_oracles(record_property):
    rng = np.random.default_rng(SEED)
    mismatches = 0
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 301))
        k = int(rng.integers(1, 5))
        pts = np.vstack([rng.normal(rng.uniform(-5, 5, 2), rng.uniform(0.2, 1.5), size=(n // k + 1, 2))
                         for _ in range(k)])[:n]
        eps, mp = float(rng.uniform(0.05, 1.0)), int(rng.integers(1, 8))
        mismatches += not np.array_equal(dbscan(pts, eps, mp).labels, brute_force_dbscan(pts, eps, mp))
        if n >= 5:
            res = kmeans(pts, min(k + 1, n), seed=int(rng.integers(1000)))
            for c in range(res.n_clusters):
                worst = max(worst, float(np.abs(res.centroids[c] - pts[res.labels == c].mean(0)).max()))
    record_property("detail", f"{mismatches}/100 DBSCAN mismatches, max centroid error {worst:.1e}")
    assert mismatches == 0
    assert worst <= 1e-9


def _random_system(rng):
    """Two sensors, three labels of Gaussian blobs; trained tree and atlas, plus a usable patient."""
    centres = rng.uniform(20, 100, size=(3, 2))
    X = np.vstack([rng.normal(c, rng.uniform(2, 6), size=(60, 2)) for c in centres])
    y = np.repeat([0, 1, 2], 60)
    ds = Dataset(SensorSchema(("u", "v"), ("a", "b", "c")), X, y)
    tree = dcm.train_dt(ds, max_depth=4)
    at = build_atlas(ds, "dbscan")
    pred = tree.predict_batch(X)
    idx = np.flatnonzero((y == 0) & (pred == 0))
    idx = idx[consistent_batch(X[idx], 0, at)]
    return ds, tree, at, (ds.record(int(idx[0])) if len(idx) else None)


@needs_z3
@pytest.mark.acceptance(10)
def test_builtin_agrees_with_external(record_property):
    rng = np.random.default_rng(SEED)
    ext, inner = external_backend(timeout=60), builtin_backend(timeout=5, seed=SEED)
    instances = found = invalid = contradictions = 0
    while instances < 50:
        ds, tree, at, rec = _random_system(rng)
        if rec is None:
            continue
        P = np.asarray(rec.measurements)
        jb = int(rng.integers(1, 3))
        # capability generous enough to reach a training record of the target label
        far = np.abs(ds.X[ds.y == jb] - P).max(axis=1)
        reach = float(np.min(far / np.abs(P).min()))
        cap = AttackerCapability(2, reach * 1.05 + 0.01)
        csp = encode_attack(rec, 0, jb, cap, tree, at)
        if not solve(csp, ext).is_sat:
            continue
        instances += 1
        r = solve(csp, inner)
        if r.is_unsat:
            contradictions += 1
        if r.is_sat:
            found += 1
            invalid += not validate_attack(_vector(csp, r.assignment, P, 0, jb, cap, "builtin"), tree, at)
    record_property("detail", f"50 satisfiable CSPs: builtin sat on {found}, {invalid} invalid, "
                              f"{contradictions} contradictions")
    assert invalid == 0 and contradictions == 0
