"""Datasets of sensor measurements: CSV I/O, splitting and a seeded generator."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import truncnorm

from .errors import (InvalidRange, MissingHeader, ParseError, SchemaError,
                     UnknownLabelColumn)

CSV_FORMAT = ".6g"
SCHEMA_SUFFIX = ".schema.json"


@dataclass(frozen=True)
class SensorSchema:
    sensor_names: tuple[str, ...]
    label_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "sensor_names", tuple(self.sensor_names))
        object.__setattr__(self, "label_names", tuple(self.label_names))
        if len(set(self.sensor_names)) != len(self.sensor_names):
            raise SchemaError("sensor names must be unique")
        if len(set(self.label_names)) != len(self.label_names):
            raise SchemaError("label names must be unique")
        if self.n_s < 2:
            raise SchemaError("need at least two sensors")
        if self.n_l < 2:
            raise SchemaError("need at least two labels")

    @property
    def n_s(self) -> int:
        return len(self.sensor_names)

    @property
    def n_l(self) -> int:
        return len(self.label_names)

    def to_dict(self) -> dict:
        return {"sensors": list(self.sensor_names), "labels": list(self.label_names)}

    @classmethod
    def from_dict(cls, d: dict) -> "SensorSchema":
        return cls(tuple(d["sensors"]), tuple(d["labels"]))


@dataclass(frozen=True)
class PatientRecord:
    measurements: tuple[float, ...]
    label: int

    def __post_init__(self):
        m = tuple(float(v) for v in self.measurements)
        if not all(math.isfinite(v) for v in m):
            raise ValueError("measurements must be finite")
        object.__setattr__(self, "measurements", m)
        object.__setattr__(self, "label", int(self.label))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of measurements ``X`` (n x n_s) with integer labels ``y``.

    ``ids`` keeps the original row number of every record so that splits and
    patient selection can refer back to the source file.
    """

    schema: SensorSchema
    X: np.ndarray
    y: np.ndarray
    ids: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.array(self.X, dtype=float).reshape(-1, self.schema.n_s)
        y = np.array(self.y, dtype=np.int64).reshape(-1)
        ids = np.arange(len(y)) if self.ids is None else np.array(self.ids, dtype=np.int64)
        if len(X) != len(y) or len(ids) != len(y):
            raise SchemaError("X, y and ids must have the same length")
        if not np.all(np.isfinite(X)):
            raise SchemaError("measurements must be finite")
        if len(y) and (y.min() < 0 or y.max() >= self.schema.n_l):
            raise SchemaError("label id outside schema")
        for a in (X, y, ids):
            a.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def records(self) -> list[PatientRecord]:
        return [PatientRecord(tuple(row), lab) for row, lab in zip(self.X, self.y)]

    def record(self, i: int) -> PatientRecord:
        return PatientRecord(tuple(self.X[i]), int(self.y[i]))

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=np.int64)
        return Dataset(self.schema, self.X[index], self.y[index], self.ids[index])

    @classmethod
    def from_records(cls, schema: SensorSchema, records: Sequence[PatientRecord]) -> "Dataset":
        for r in records:
            if len(r.measurements) != schema.n_s:
                raise SchemaError("record length does not match schema")
        X = np.array([r.measurements for r in records], dtype=float).reshape(-1, schema.n_s)
        return cls(schema, X, [r.label for r in records])


# ---------------------------------------------------------------------------
# CSV

def load_csv(path, label_column: str = "label", schema_path=None) -> Dataset:
    """Read a comma-separated file with a header row.

    Label values are taken as integer ids when every value is an integer,
    otherwise they are mapped to ids in order of first appearance. A
    ``<path>.schema.json`` sidecar, when present, fixes the label names.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise MissingHeader(f"{path}: no header row")
    header = [h.strip() for h in rows[0]]
    if label_column not in header:
        raise UnknownLabelColumn(f"{path}: no column named {label_column!r}")
    li = header.index(label_column)
    sensor_cols = [i for i in range(len(header)) if i != li]
    sensor_names = [header[i] for i in sensor_cols]

    X = np.empty((len(rows) - 1, len(sensor_cols)))
    raw_labels = []
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            # missing fields are rejected, never imputed
            missing = header[len(row)] if len(row) < len(header) else header[-1]
            raise ParseError(r, missing, f"row {r} has {len(row)} fields, expected {len(header)}")
        for k, i in enumerate(sensor_cols):
            try:
                v = float(row[i])
            except ValueError:
                raise ParseError(r, header[i]) from None
            if not math.isfinite(v):
                raise ParseError(r, header[i], f"row {r}, column {header[i]!r}: non-finite value")
            X[r - 1, k] = v
        raw_labels.append(row[li].strip())

    sidecar = Path(schema_path) if schema_path else Path(str(path) + SCHEMA_SUFFIX)
    if sidecar.exists():
        schema = SensorSchema.from_dict(json.loads(sidecar.read_text()))
        if list(schema.sensor_names) != sensor_names:
            raise SchemaError(f"{sidecar}: sensor names differ from CSV header")
        y = _label_ids(raw_labels, schema.label_names)
    elif all(_is_int(v) for v in raw_labels):
        y = [int(v) for v in raw_labels]
        n_l = max(max(y, default=0) + 1, 2)
        schema = SensorSchema(tuple(sensor_names), tuple(str(i) for i in range(n_l)))
    else:
        names = list(dict.fromkeys(raw_labels))
        if len(names) < 2:
            names.append("__other__")
        schema = SensorSchema(tuple(sensor_names), tuple(names))
        y = [names.index(v) for v in raw_labels]
    return Dataset(schema, X, y)


def _is_int(s: str) -> bool:
    try:
        int(s)
    except ValueError:
        return False
    return True


def _label_ids(raw, names):
    out = []
    for r, v in enumerate(raw, start=1):
        if v in names:
            out.append(names.index(v))
        elif _is_int(v) and 0 <= int(v) < len(names):
            out.append(int(v))
        else:
            raise ParseError(r, "label", f"row {r}: unknown label {v!r}")
    return out


def save_csv(dataset: Dataset, path, label_column: str = "label", write_schema: bool = True):
    """Write ``dataset`` as CSV (6 significant digits) plus a schema sidecar."""
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(dataset.schema.sensor_names) + [label_column])
    for row, lab in zip(dataset.X, dataset.y):
        w.writerow([format(v, CSV_FORMAT) for v in row] + [int(lab)])
    path.write_text(buf.getvalue(), encoding="utf-8")
    if write_schema:
        Path(str(path) + SCHEMA_SUFFIX).write_text(
            json.dumps(dataset.schema.to_dict(), indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# synthetic generator

@dataclass(frozen=True)
class SensorProfile:
    mean: float
    std: float
    low: float
    high: float


@dataclass(frozen=True)
class SyntheticConfig:
    sensor_names: tuple[str, ...]
    label_names: tuple[str, ...]
    profiles: tuple[tuple[SensorProfile, ...], ...]  # [label][sensor]
    n_samples: int = 17000

    def to_dict(self) -> dict:
        return {
            "sensors": list(self.sensor_names),
            "n_samples": self.n_samples,
            "labels": {
                lab: {s: [p.mean, p.std, p.low, p.high] for s, p in zip(self.sensor_names, row)}
                for lab, row in zip(self.label_names, self.profiles)
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticConfig":
        sensors = tuple(d["sensors"])
        labels = tuple(d["labels"])
        profiles = []
        for lab in labels:
            spec = d["labels"][lab]
            profiles.append(tuple(SensorProfile(*map(float, spec[s])) for s in sensors))
        return cls(sensors, labels, tuple(profiles), int(d.get("n_samples", 17000)))


# Normal-state baselines follow common clinical reference ranges.
_SENSORS = ("heart_rate", "systolic", "diastolic", "glucose", "spo2",
            "respiration", "alcohol", "skin_conductance")
_BASE = {
    "heart_rate": (80.0, 7.0, 40.0, 180.0),
    "systolic": (118.0, 7.0, 80.0, 200.0),
    "diastolic": (78.0, 5.0, 50.0, 130.0),
    "glucose": (100.0, 10.0, 50.0, 300.0),
    "spo2": (97.0, 1.0, 85.0, 100.0),
    "respiration": (16.0, 1.8, 8.0, 40.0),
    "alcohol": (0.03, 0.012, 0.0, 0.2),
    "skin_conductance": (5.0, 1.2, 0.5, 25.0),
}
# per-label overrides: sensor -> (mean, std)
_SHIFTS = {
    "normal": {},
    "high_blood_pressure": {"systolic": (148.0, 8.0), "diastolic": (96.0, 5.0),
                            "heart_rate": (86.0, 7.0)},
    "high_cholesterol": {"heart_rate": (94.0, 7.0), "systolic": (132.0, 7.0),
                         "glucose": (118.0, 10.0), "alcohol": (0.06, 0.015)},
    "abnormal_oxygen": {"spo2": (90.5, 1.5), "respiration": (23.0, 2.2),
                        "heart_rate": (98.0, 8.0)},
    "excessive_sweating": {"skin_conductance": (11.0, 1.8), "heart_rate": (92.0, 7.0),
                           "respiration": (19.5, 1.8)},
    "high_blood_sugar": {"glucose": (175.0, 15.0), "skin_conductance": (7.0, 1.2),
                         "alcohol": (0.02, 0.01)},
}


def default_synthetic_config(n_samples: int = 17000) -> SyntheticConfig:
    profiles = []
    for lab in _SHIFTS:
        row = []
        for s in _SENSORS:
            mean, std, low, high = _BASE[s]
            if s in _SHIFTS[lab]:
                mean, std = _SHIFTS[lab][s]
            row.append(SensorProfile(mean, std, max(low, mean - 4 * std), min(high, mean + 4 * std)))
        profiles.append(tuple(row))
    return SyntheticConfig(_SENSORS, tuple(_SHIFTS), tuple(profiles), n_samples)


def validate_config(config: SyntheticConfig):
    if config.n_samples < 0:
        raise InvalidRange("n_samples must be >= 0")
    if len(config.profiles) != len(config.label_names):
        raise InvalidRange("one profile row per label is required")
    for lab, row in zip(config.label_names, config.profiles):
        if len(row) != len(config.sensor_names):
            raise InvalidRange(f"label {lab!r}: one profile per sensor is required")
        for s, p in zip(config.sensor_names, row):
            vals = (p.mean, p.std, p.low, p.high)
            if not all(math.isfinite(v) for v in vals):
                raise InvalidRange(f"sensor {s!r} (label {lab!r}): non-finite range")
            if p.low > p.high:
                raise InvalidRange(f"sensor {s!r} (label {lab!r}): low {p.low} > high {p.high}")
            if p.std < 0:
                raise InvalidRange(f"sensor {s!r} (label {lab!r}): negative std")


def generate_synthetic(config: SyntheticConfig, seed: int) -> Dataset:
    """Draw ``config.n_samples`` records from per-(label, sensor) truncated Gaussians.

    Labels are balanced (the first ``n % n_l`` labels get one extra record)
    and rows are shuffled. The output is a pure function of ``(config, seed)``.
    """
    validate_config(config)
    schema = SensorSchema(config.sensor_names, config.label_names)
    rng = np.random.default_rng(seed)
    n_l = schema.n_l
    counts = [config.n_samples // n_l + (1 if j < config.n_samples % n_l else 0) for j in range(n_l)]
    blocks, labels = [], []
    for j, (cnt, row) in enumerate(zip(counts, config.profiles)):
        cols = [_truncated_normal(p, cnt, rng) for p in row]
        blocks.append(np.column_stack(cols) if cnt else np.empty((0, schema.n_s)))
        labels.append(np.full(cnt, j))
    X = np.vstack(blocks)
    y = np.concatenate(labels)
    order = rng.permutation(len(y))
    return Dataset(schema, X[order], y[order])


def _truncated_normal(p: SensorProfile, n: int, rng) -> np.ndarray:
    if n == 0:
        return np.empty(0)
    if p.std == 0 or p.low == p.high:
        return np.full(n, min(max(p.mean, p.low), p.high))
    a, b = (p.low - p.mean) / p.std, (p.high - p.mean) / p.std
    return truncnorm.rvs(a, b, loc=p.mean, scale=p.std, size=n, random_state=rng)


# ---------------------------------------------------------------------------
# splitting

def stratified_split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    if not 0.0 <= test_fraction <= 1.0:
        raise ValueError("test_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    test_idx = []
    for j in range(dataset.schema.n_l):
        idx = np.flatnonzero(dataset.y == j)
        n_test = int(round(test_fraction * len(idx)))
        test_idx.append(rng.permutation(idx)[:n_test])
    test_mask = np.zeros(len(dataset), dtype=bool)
    if test_idx:
        test_mask[np.concatenate(test_idx)] = True
    return dataset.subset(np.flatnonzero(~test_mask)), dataset.subset(np.flatnonzero(test_mask))
