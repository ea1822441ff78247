"""Report documents, their JSON schemas, and plot-ready CSV."""
from __future__ import annotations

import csv
import hashlib
import io
import platform
import sys
from importlib import metadata

import numpy as np

from .attack import AttackMatrix, AttackVector, FeasibilityGrid, ResiliencyReport

COUNT_CONVENTION = ("number of target labels with a validated witness at the cell's "
                    "(max_sensors, threshold) for the chosen patient")


def tool_version() -> str:
    try:
        return metadata.version("shsthreat")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def provenance(seed: int | None, inputs: dict | None = None, **extra) -> dict:
    """Seed, versions and input hashes embedded in every output document."""
    return {
        "tool": "shsthreat", "version": tool_version(), "seed": seed,
        "python": platform.python_version(), "numpy": np.__version__,
        "inputs": {k: {"path": str(p), "sha256": file_digest(p)} for k, p in (inputs or {}).items()},
        "argv": list(sys.argv),
        **extra,
    }


def frequency_report(vectors, sensor_names) -> dict:
    from .attack import sensor_frequency
    counts = sensor_frequency(vectors, len(sensor_names))
    return {name: int(c) for name, c in zip(sensor_names, counts)}


def grid_report(grid: FeasibilityGrid, sensor_names, label_names) -> dict:
    cells = []
    for (jb, m, t), (status, how, vec) in sorted(grid.cells.items()):
        cells.append({"j_bar": jb, "target": label_names[jb], "max_sensors": m, "threshold": t,
                      "status": status, "how": how,
                      "vector": None if vec is None else vec.to_dict(True)})
    return {"max_sensors": list(grid.max_sensors), "thresholds": list(grid.thresholds),
            "counts": grid.counts().tolist(), "unknown": grid.unknown().tolist(),
            "count_convention": COUNT_CONVENTION,
            "frequency": frequency_report(grid.vectors(), sensor_names), "cells": cells}


def counts_csv(grid: FeasibilityGrid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["max_sensors", *[f"{t:g}" for t in grid.thresholds]])
    for m, row in zip(grid.max_sensors, grid.counts()):
        w.writerow([m, *row.tolist()])
    return buf.getvalue()


def frequency_csv(freq: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sensor", "count"])
    for k, v in freq.items():
        w.writerow([k, v])
    return buf.getvalue()


def timings_csv(timings: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["stage", "seconds"])
    for k, v in timings.items():
        w.writerow([k, f"{v:.6f}"])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# schemas

_NUM_ARRAY = {"type": "array", "items": {"type": "number"}}
_CAP = {"type": "object", "required": ["max_sensors", "threshold"],
        "properties": {"max_sensors": {"type": "integer", "minimum": 0},
                       "threshold": {"type": "number", "exclusiveMinimum": 0}}}
_PROV = {"type": "object", "required": ["tool", "version", "seed", "inputs"]}

ATTACK_VECTOR_SCHEMA = {
    "type": "object",
    "required": ["patient", "j", "j_bar", "deltas", "altered", "capability", "backend", "validated"],
    "properties": {"j": {"type": "integer"}, "j_bar": {"type": "integer"}, "deltas": _NUM_ARRAY,
                   "altered": _NUM_ARRAY, "baseline": _NUM_ARRAY, "capability": _CAP,
                   "backend": {"type": "string"}, "validated": {"type": "boolean"}},
}
_NULLABLE_VECTOR = {"anyOf": [{"type": "null"}, ATTACK_VECTOR_SCHEMA]}

ATTACK_SCHEMA = {
    "type": "object", "required": ["provenance", "result", "timings"],
    "properties": {"provenance": _PROV, "timings": {"type": "object"},
                   "result": {"type": "object", "required": ["status", "vector", "rungs"],
                              "properties": {"status": {"enum": ["feasible", "infeasible", "unknown"]},
                                             "vector": _NULLABLE_VECTOR}}},
}

MATRIX_SCHEMA = {
    "type": "object", "required": ["provenance", "labels", "cells", "timings"],
    "properties": {"provenance": _PROV, "labels": {"type": "array", "items": {"type": "string"}},
                   "cells": {"type": "array", "items": {"type": "array", "items": {
                       "type": "object", "required": ["status"]}}}},
}

RESILIENCY_SCHEMA = {
    "type": "object", "required": ["provenance", "j", "j_bar", "r", "first_feasible", "certificates"],
    "properties": {"provenance": _PROV, "j": {"type": "integer"}, "j_bar": {"type": "integer"},
                   "r": {"type": "integer", "minimum": 0},
                   "first_feasible": {"anyOf": [{"type": "null"}, _CAP]},
                   "certificates": {"type": "array", "items": {
                       "type": "object", "required": ["max_sensors", "status"]}}},
}

FREQUENCY_SCHEMA = {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}}

REPORT_SCHEMA = {
    "type": "object", "required": ["provenance", "counts", "thresholds", "max_sensors", "frequency",
                                   "count_convention", "timings"],
    "properties": {"provenance": _PROV, "counts": {"type": "array", "items": {"type": "array"}},
                   "frequency": FREQUENCY_SCHEMA},
}

METRICS_SCHEMA = {
    "type": "object", "required": ["provenance", "accuracy", "precision", "recall", "f1", "confusion"],
    "properties": {k: {"type": "number", "minimum": 0, "maximum": 1}
                   for k in ("accuracy", "precision", "recall", "f1")},
}

ATLAS_REPORT_SCHEMA = {
    "type": "object", "required": ["provenance", "coverage", "keys", "timings"],
    "properties": {"coverage": {"type": "number", "minimum": 0, "maximum": 1}},
}

SCHEMAS = {"attack": ATTACK_SCHEMA, "matrix": MATRIX_SCHEMA, "resiliency": RESILIENCY_SCHEMA,
           "frequency": FREQUENCY_SCHEMA, "report": REPORT_SCHEMA, "metrics": METRICS_SCHEMA,
           "atlas_report": ATLAS_REPORT_SCHEMA, "attack_vector": ATTACK_VECTOR_SCHEMA}


def matrix_report(m: AttackMatrix) -> dict:
    return m.to_dict()


def resiliency_report(r: ResiliencyReport) -> dict:
    return r.to_dict()


def vector_report(v: AttackVector, validated: bool, patient=None) -> dict:
    return v.to_dict(validated, patient)
