"""Attack queries, capability escalation, matrices and resiliency."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..adm.atlas import ClusterAtlas, consistent, consistent_batch
from ..cir.csp import CSP
from ..cir.encode import encode_attack, measurement_vars
from ..cir.expr import EPS_DIV, Compare, Linear, cmp, disj, walk
from ..data import PatientRecord
from ..errors import EmptyLadder, IncompleteBackend, InvalidCapability, InvalidGoal
from ..solve import BackendDescriptor, solve
from ..solve.search import _expand

log = logging.getLogger(__name__)

FEASIBLE, INFEASIBLE, UNKNOWN = "feasible", "infeasible", "unknown"
DEFAULT_THRESHOLDS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)
# relative width of the no-man's-land kept around every atom when a witness has to be re-solved
DEAD_ZONE = 1e-7


@dataclass(frozen=True, order=True)
class AttackerCapability:
    max_sensors: int
    threshold: float

    def __post_init__(self):
        if int(self.max_sensors) != self.max_sensors or self.max_sensors < 0:
            raise InvalidCapability(f"max_sensors must be a non-negative integer, got {self.max_sensors!r}")
        if not (np.isfinite(self.threshold) and self.threshold > 0):
            raise InvalidCapability(f"threshold must be positive, got {self.threshold!r}")
        object.__setattr__(self, "max_sensors", int(self.max_sensors))
        object.__setattr__(self, "threshold", float(self.threshold))

    def limits(self, baseline) -> np.ndarray:
        return self.threshold * np.maximum(np.abs(np.asarray(baseline, dtype=float)), EPS_DIV)

    def to_dict(self):
        return {"max_sensors": self.max_sensors, "threshold": self.threshold}


def default_ladder(n_s: int, thresholds=DEFAULT_THRESHOLDS) -> list[AttackerCapability]:
    return [AttackerCapability(m, t) for m in range(1, n_s + 1) for t in thresholds]


@dataclass(frozen=True, eq=False)
class AttackVector:
    baseline: np.ndarray
    deltas: np.ndarray
    altered: np.ndarray
    source: int
    target: int
    capability: AttackerCapability
    backend: str = ""

    def __post_init__(self):
        for name in ("baseline", "deltas", "altered"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @property
    def touched(self) -> np.ndarray:
        return np.flatnonzero(self.deltas != 0)

    def to_dict(self, validated: bool | None = None, patient=None) -> dict:
        d = {"patient": patient, "baseline": self.baseline.tolist(), "j": self.source,
             "j_bar": self.target, "deltas": self.deltas.tolist(), "altered": self.altered.tolist(),
             "capability": self.capability.to_dict(), "backend": self.backend}
        if validated is not None:
            d["validated"] = bool(validated)
        return d

    @classmethod
    def from_dict(cls, d) -> "AttackVector":
        return cls(np.array(d["baseline"], dtype=float), np.array(d["deltas"], dtype=float),
                   np.array(d["altered"], dtype=float), int(d["j"]), int(d["j_bar"]),
                   AttackerCapability(**d["capability"]), d.get("backend", ""))


def validate_attack(vector: AttackVector, dcm, atlas: ClusterAtlas) -> bool:
    """Check a witness by running the live models on the altered measurements."""
    P, d, Pb = vector.baseline, vector.deltas, vector.altered
    if not (P.shape == d.shape == Pb.shape) or not np.all(np.isfinite(Pb)) or not np.all(np.isfinite(d)):
        return False
    # altered must be baseline + delta up to one rounding step
    if np.any(np.abs(Pb - (P + d)) > 4 * np.spacing(np.maximum(np.abs(Pb), np.abs(P)))):
        return False
    if np.any((d != 0) != (Pb != P)):
        return False
    cap = vector.capability
    if int(np.count_nonzero(d)) > cap.max_sensors:
        return False
    if np.any(np.abs(d) >= cap.limits(P)):
        return False
    if dcm.predict(Pb) != vector.target:
        return False
    return bool(consistent(Pb, vector.target, atlas))


@dataclass(frozen=True)
class AttackResult:
    status: str
    capability: AttackerCapability
    vector: AttackVector | None = None
    reason: str | None = None
    seconds: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"status": self.status, "capability": self.capability.to_dict(), "reason": self.reason,
                "vector": None if self.vector is None else self.vector.to_dict(True),
                "seconds": self.seconds, "stats": self.stats}


def _vector(csp: CSP, env: dict, P, j, j_bar, cap, backend) -> AttackVector:
    n_s = len(P)
    dvars, pvars = measurement_vars(n_s, "dP"), measurement_vars(n_s)
    deltas = np.array([float(Fraction(env[v])) for v in dvars])
    altered = np.array([float(Fraction(env[v])) for v in pvars])
    # rounding can make P + d land back on P; keep the pair coherent
    deltas = np.where(altered == P, 0.0, deltas)
    return AttackVector(np.asarray(P, dtype=float).copy(), deltas, altered, j, j_bar, cap, backend)


def _dead_zone(csp: CSP, P) -> CSP:
    """Same CSP plus a ban on every measurement-dependent atom sitting within a hair of its boundary.

    Only shrinks the solution set, so a witness is still a witness; an Unsat
    answer here says nothing about the original CSP.
    """
    n_s = len(P)
    base = _expand(csp, {v: np.array([0.0]) for v in measurement_vars(n_s, "dP")})
    extra = []
    seen = set()
    for a in csp.assertions:
        for node in walk(a):
            if not isinstance(node, Compare) or node.op == "=" or node in seen:
                continue
            if not any(n.startswith(("Pbar_", "nn_")) for n, _ in node.lhs.terms):
                continue
            seen.add(node)
            scale = abs(node.rhs) + abs(node.lhs.const) + sum(
                abs(c) * max(abs(float(base[n][0])), 1.0) for n, c in node.lhs.terms)
            width = DEAD_ZONE * max(scale, 1.0)
            value = sum(c * float(base[n][0]) for n, c in node.lhs.terms) + node.lhs.const - node.rhs
            if abs(value) < width:
                continue  # the baseline itself sits in the zone
            diff = Linear(node.lhs.terms, node.lhs.const - node.rhs)
            extra.append(disj(cmp(diff, ">=", width), cmp(diff, "<=", -width)))
    return CSP.build(list(csp.assertions) + extra, {**csp.metadata, "dead_zone": DEAD_ZONE},
                     csp.definitions, csp.bounds)


def find_attack(patient: PatientRecord, j: int, j_bar: int, capability: AttackerCapability, dcm,
                atlas: ClusterAtlas, backend: BackendDescriptor) -> AttackResult:
    """Encode, solve and validate one attack query."""
    if j_bar == j:
        raise InvalidGoal("target label equals the source label")
    P = np.asarray(patient.measurements, dtype=float)
    t0 = time.perf_counter()
    csp = encode_attack(patient, j, j_bar, capability, dcm, atlas)
    t1 = time.perf_counter()
    res = solve(csp, backend)
    seconds = {"encoding": t1 - t0, "solving": res.seconds}
    stats = {"variables": len(csp.variables), "clauses": len(csp.assertions)}
    if res.is_unsat:
        return AttackResult(INFEASIBLE, capability, seconds=seconds, stats=stats)
    if res.is_unknown:
        return AttackResult(UNKNOWN, capability, reason=res.reason, seconds=seconds, stats=stats)
    vec = _vector(csp, res.assignment, P, j, j_bar, capability, backend.name)
    if validate_attack(vec, dcm, atlas):
        return AttackResult(FEASIBLE, capability, vec, seconds=seconds, stats=stats)
    # exact witness lost in float rounding: ask again with every atom kept off its boundary
    log.info("witness for %d -> %d failed float validation; re-solving with a dead zone", j, j_bar)
    res2 = solve(_dead_zone(csp, P), backend)
    seconds["solving"] += res2.seconds
    if res2.is_sat:
        vec = _vector(csp, res2.assignment, P, j, j_bar, capability, backend.name)
        if validate_attack(vec, dcm, atlas):
            return AttackResult(FEASIBLE, capability, vec, seconds=seconds, stats=stats)
    # the exact CSP is satisfiable, so this can never be reported infeasible
    return AttackResult(UNKNOWN, capability, reason="float-robustness", seconds=seconds, stats=stats)


@dataclass(frozen=True)
class Escalation:
    status: str
    capability: AttackerCapability | None
    vector: AttackVector | None
    rungs: tuple  # (capability, status, how) per ladder rung; how is "solved" or "implied"
    seconds: dict = field(default_factory=dict)

    @property
    def unresolved(self) -> list[AttackerCapability]:
        return [c for c, s, _ in self.rungs if s == UNKNOWN]

    def to_dict(self) -> dict:
        return {"status": self.status,
                "capability": None if self.capability is None else self.capability.to_dict(),
                "vector": None if self.vector is None else self.vector.to_dict(True),
                "rungs": [{"capability": c.to_dict(), "status": s, "how": h} for c, s, h in self.rungs],
                "unresolved": [c.to_dict() for c in self.unresolved], "seconds": self.seconds}


def _add_seconds(acc, s):
    for k, v in s.items():
        acc[k] = acc.get(k, 0.0) + v


def escalate(patient: PatientRecord, j: int, j_bar: int, ladder, dcm, atlas: ClusterAtlas,
             backend: BackendDescriptor, relax: bool = True) -> Escalation:
    """First feasible rung of ``ladder`` in order.

    With a complete backend and ``relax``, each sensor count is first tried
    at its largest threshold; an Unsat answer there settles every rung with
    that count, since each is a tightening of it.
    """
    ladder = list(ladder)
    if not ladder:
        raise EmptyLadder("the capability ladder is empty")
    if ladder != sorted(ladder):
        raise ValueError("ladder must be sorted by (max_sensors, threshold)")
    if j_bar == j:
        raise InvalidGoal("target label equals the source label")
    outcome: dict[AttackerCapability, tuple[str, str]] = {}
    vectors: dict[AttackerCapability, AttackVector] = {}
    seconds: dict = {}
    relax = relax and backend.complete

    def run(cap):
        r = find_attack(patient, j, j_bar, cap, dcm, atlas, backend)
        _add_seconds(seconds, r.seconds)
        outcome[cap] = (r.status, "solved")
        if r.vector is not None:
            vectors[cap] = r.vector
        return r.status

    for i, cap in enumerate(ladder):
        if cap not in outcome and relax:
            top = [c for c in ladder[i:] if c.max_sensors == cap.max_sensors][-1]
            if top != cap and top not in outcome and run(top) == INFEASIBLE:
                for c in ladder[i:]:
                    if c.max_sensors == cap.max_sensors:
                        outcome.setdefault(c, (INFEASIBLE, "implied"))
        if cap not in outcome:
            run(cap)
        if outcome[cap][0] == FEASIBLE:
            rungs = tuple((c, *outcome[c]) for c in ladder if c in outcome)
            return Escalation(FEASIBLE, cap, vectors[cap], rungs, seconds)
    rungs = tuple((c, *outcome.get(c, (UNKNOWN, "skipped"))) for c in ladder)
    status = INFEASIBLE if all(s == INFEASIBLE for _, s, _ in rungs) else UNKNOWN
    return Escalation(status, None, None, rungs, seconds)


@dataclass(frozen=True)
class AttackMatrix:
    labels: tuple[str, ...]
    cells: dict  # (j, j_bar) -> Escalation
    patients: dict = field(default_factory=dict)  # source label -> patient id

    def cell(self, j, j_bar):
        if j == j_bar:
            return "not-applicable"
        return self.cells.get((j, j_bar))

    def witnesses(self) -> list[AttackVector]:
        return [e.vector for e in self.cells.values() if e.status == FEASIBLE]

    def to_dict(self) -> dict:
        n = len(self.labels)
        grid = []
        for j in range(n):
            row = []
            for jb in range(n):
                c = self.cell(j, jb)
                if isinstance(c, str):
                    row.append({"status": c})
                elif c is None:
                    row.append({"status": "not-run"})
                else:
                    row.append(c.to_dict())
            grid.append(row)
        return {"labels": list(self.labels), "patients": {str(k): v for k, v in self.patients.items()},
                "cells": grid}


def attack_matrix(patients, ladder, dcm, atlas: ClusterAtlas, backend: BackendDescriptor,
                  relax: bool = True) -> AttackMatrix:
    """Escalate every off-diagonal goal.

    ``patients`` is a single :class:`PatientRecord` (one row) or a mapping
    from source label to ``(patient_id, PatientRecord)``.
    """
    if isinstance(patients, PatientRecord):
        patients = {dcm.predict(patients.measurements): (None, patients)}
    cells = {}
    for j, (_, rec) in sorted(patients.items()):
        for j_bar in range(atlas.schema.n_l):
            if j_bar != j:
                cells[(j, j_bar)] = escalate(rec, j, j_bar, ladder, dcm, atlas, backend, relax)
    return AttackMatrix(tuple(atlas.schema.label_names), cells, {j: pid for j, (pid, _) in patients.items()})


@dataclass(frozen=True)
class ResiliencyReport:
    source: int
    target: int
    threshold: float
    r: int
    first_feasible: AttackerCapability | None
    certificates: tuple  # (max_sensors, status)
    vector: AttackVector | None = None

    def to_dict(self) -> dict:
        return {"j": self.source, "j_bar": self.target, "threshold": self.threshold, "r": self.r,
                "first_feasible": None if self.first_feasible is None else self.first_feasible.to_dict(),
                "certificates": [{"max_sensors": m, "status": s} for m, s in self.certificates],
                "vector": None if self.vector is None else self.vector.to_dict(True)}


def resiliency(patient: PatientRecord, j: int, j_bar: int, max_r: int, threshold: float, dcm,
               atlas: ClusterAtlas, backend: BackendDescriptor) -> ResiliencyReport:
    """Largest r <= max_r such that every attack with at most r sensors is certified Unsat."""
    if not backend.complete:
        raise IncompleteBackend(f"backend {backend.name!r} cannot certify infeasibility")
    r = 0
    first = None
    vec = None
    certs = []
    for m in range(1, max_r + 1):
        res = find_attack(patient, j, j_bar, AttackerCapability(m, threshold), dcm, atlas, backend)
        certs.append((m, res.status))
        if res.status == INFEASIBLE:
            r = m
            continue
        if res.status == FEASIBLE:
            first, vec = res.capability, res.vector
        break
    return ResiliencyReport(j, j_bar, threshold, r, first, tuple(certs), vec)


def sensor_frequency(vectors, n_s: int | None = None) -> np.ndarray:
    vectors = list(vectors)
    if n_s is None:
        n_s = len(vectors[0].deltas) if vectors else 0
    counts = np.zeros(n_s, dtype=np.int64)
    for v in vectors:
        counts[v.touched] += 1
    return counts


@dataclass(frozen=True)
class FeasibilityGrid:
    max_sensors: tuple[int, ...]
    thresholds: tuple[float, ...]
    # (target, max_sensors, threshold) -> (status, how, vector)
    cells: dict

    def counts(self) -> np.ndarray:
        out = np.zeros((len(self.max_sensors), len(self.thresholds)), dtype=np.int64)
        for (_, m, t), (status, _, _) in self.cells.items():
            if status == FEASIBLE:
                out[self.max_sensors.index(m), self.thresholds.index(t)] += 1
        return out

    def unknown(self) -> np.ndarray:
        out = np.zeros((len(self.max_sensors), len(self.thresholds)), dtype=np.int64)
        for (_, m, t), (status, _, _) in self.cells.items():
            if status == UNKNOWN:
                out[self.max_sensors.index(m), self.thresholds.index(t)] += 1
        return out

    def vectors(self) -> list[AttackVector]:
        return [v for (status, _, v) in self.cells.values() if status == FEASIBLE]


def feasibility_grid(patient: PatientRecord, j: int, dcm, atlas: ClusterAtlas, backend: BackendDescriptor,
                     max_sensors=None, thresholds=DEFAULT_THRESHOLDS, reuse: bool = True) -> FeasibilityGrid:
    """Attack outcome for every target and every (max_sensors, threshold) cell.

    With ``reuse``, a witness found at a smaller cell is re-validated at the
    current one before calling the solver; a cell is only marked feasible by
    a witness that passes :func:`validate_attack` at that cell's capability.
    """
    n_s = atlas.schema.n_s
    ms = tuple(max_sensors or range(1, n_s + 1))
    ts = tuple(thresholds)
    cells = {}
    for j_bar in range(atlas.schema.n_l):
        if j_bar == j:
            continue
        found: list[AttackVector] = []
        for m in ms:
            for t in ts:
                cap = AttackerCapability(m, t)
                hit = None
                if reuse:
                    for v in found:
                        w = AttackVector(v.baseline, v.deltas, v.altered, j, j_bar, cap, v.backend)
                        if validate_attack(w, dcm, atlas):
                            hit = w
                            break
                if hit is not None:
                    cells[(j_bar, m, t)] = (FEASIBLE, "reused", hit)
                    continue
                r = find_attack(patient, j, j_bar, cap, dcm, atlas, backend)
                cells[(j_bar, m, t)] = (r.status, "solved", r.vector)
                if r.vector is not None:
                    found.append(r.vector)
    return FeasibilityGrid(ms, ts, cells)


def monotonicity_violations(counts: np.ndarray, unknown: np.ndarray | None = None) -> list:
    """Adjacent cell pairs where the count drops along either axis, skipping rows/cols touched by Unknown."""
    bad = []
    unknown = np.zeros_like(counts) if unknown is None else unknown
    rows, cols = counts.shape
    for i in range(rows):
        for k in range(cols):
            if unknown[i, k]:
                continue
            if i + 1 < rows and not unknown[i + 1, k] and counts[i + 1, k] < counts[i, k]:
                bad.append(((i, k), (i + 1, k)))
            if k + 1 < cols and not unknown[i, k + 1] and counts[i, k + 1] < counts[i, k]:
                bad.append(((i, k), (i, k + 1)))
    return bad


def perturbation_falsification(patient: PatientRecord, j: int, j_bar: int, capability: AttackerCapability,
                               dcm, atlas: ClusterAtlas, trials: int = 10000, seed: int = 0) -> int:
    """Count random within-capability perturbations that achieve the goal (zero when resilient).

    Each trial alters a random subset of at most ``max_sensors`` sensors by
    a uniform amount strictly inside the threshold; success is judged the
    way :func:`validate_attack` judges a witness.
    """
    rng = np.random.default_rng(seed)
    P = np.asarray(patient.measurements, dtype=float)
    n_s = len(P)
    lim = capability.limits(P)
    D = np.zeros((trials, n_s))
    for t in range(trials):
        k = int(rng.integers(1, capability.max_sensors + 1)) if capability.max_sensors else 0
        idx = rng.choice(n_s, size=min(k, n_s), replace=False)
        D[t, idx] = rng.uniform(-lim[idx], lim[idx])
    Pb = P + D
    D = Pb - P
    ok = np.all(np.abs(D) < lim, axis=1) & (np.count_nonzero(D, axis=1) <= capability.max_sensors)
    ok &= dcm.predict_batch(Pb) == j_bar
    idx = np.flatnonzero(ok)
    if len(idx):
        ok[idx] = consistent_batch(Pb[idx], j_bar, atlas)
    return int(ok.sum())
