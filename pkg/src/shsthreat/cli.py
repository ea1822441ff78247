"""Command-line entry point: generate, train, atlas, attack, matrix, resiliency, report."""
from __future__ import annotations

import functools
import json
import logging
import time
from pathlib import Path

import click
import numpy as np

from . import dcm as dcm_mod
from .adm.atlas import AtlasParams, ClusterAtlas, build_atlas, consistent, consistent_batch, coverage
from .data import (SyntheticConfig, default_synthetic_config, generate_synthetic, load_csv, save_csv,
                   stratified_split, validate_config)
from .errors import BackendUnavailable, MalformedModel, ShsError
from .solve import SOLVER_ENV, backend_by_name
from .threat import (AttackerCapability, attack_matrix, default_ladder, escalate, feasibility_grid,
                     resiliency, validate_attack)
from .threat.report import counts_csv, frequency_csv, frequency_report, grid_report, provenance, timings_csv

EXIT_BACKEND = 3
EXIT_ANALYSIS = 1


def _write_json(path: Path, doc: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    click.echo(f"wrote {path}")


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    click.echo(f"wrote {path}")


def _guard(fn):
    """Map library errors onto exit codes."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (BackendUnavailable, MalformedModel) as exc:
            click.echo(f"backend failure: {exc}", err=True)
            raise SystemExit(EXIT_BACKEND)
        except ShsError as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            raise SystemExit(EXIT_ANALYSIS)
    return wrapper


def _parse_ladder(text: str, n_s: int):
    if text == "default":
        return default_ladder(n_s)
    rungs = []
    for part in text.split(","):
        try:
            m, t = part.split(":")
            rungs.append(AttackerCapability(int(m), float(t)))
        except (ValueError, ShsError) as exc:
            raise click.BadParameter(f"bad rung {part!r}; expected MAX_SENSORS:THRESHOLD") from exc
    return sorted(rungs)


_data_opt = click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True,
                         help="Dataset CSV (schema sidecar is picked up if present).")
_seed_opt = click.option("--seed", type=int, default=0, show_default=True)
_split_opt = click.option("--test-fraction", type=float, default=0.2, show_default=True)
_out_opt = click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out", show_default=True)
_model_opt = click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
_atlas_opt = click.option("--atlas", "atlas_path", type=click.Path(exists=True, dir_okay=False), required=True)


def _backend_opts(fn):
    fn = click.option("--backend", type=click.Choice(["smtlib", "builtin"]), default="smtlib",
                      show_default=True)(fn)
    fn = click.option("--solver-path", type=str, default=None,
                      help=f"SMT solver binary (defaults to ${SOLVER_ENV}, then z3 on PATH).")(fn)
    fn = click.option("--timeout", type=float, default=None, help="Per-query timeout in seconds.")(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    """Constraint-based attack analysis of smart-healthcare classifiers."""
    logging.basicConfig(level=logging.INFO if verbose else logging.ERROR, format="%(levelname)s %(message)s")


@main.command()
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="CSV to write.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Generator config JSON (defaults to the built-in 8-sensor, 6-label profile).")
@click.option("--n-samples", type=int, default=None)
@_seed_opt
@_guard
def generate(out_path, config_path, n_samples, seed):
    """Write a synthetic dataset and its schema sidecar."""
    if config_path:
        config = SyntheticConfig.from_dict(json.loads(Path(config_path).read_text()))
    else:
        config = default_synthetic_config()
    if n_samples is not None:
        config = SyntheticConfig(config.sensor_names, config.label_names, config.profiles, n_samples)
    validate_config(config)
    ds = generate_synthetic(config, seed)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_csv(ds, out_path)
    click.echo(f"wrote {out_path} ({len(ds)} rows)")


def _split(data_path, test_fraction, seed):
    ds = load_csv(data_path)
    return ds, *stratified_split(ds, test_fraction, seed)


@main.command()
@_data_opt
@click.option("--dcm", "kind", type=click.Choice(["dt", "lr", "nn"]), default="dt", show_default=True)
@click.option("--max-depth", type=int, default=8, show_default=True)
@click.option("--min-leaf", type=int, default=5, show_default=True)
@click.option("--epochs", type=int, default=60, show_default=True)
@click.option("--hidden", type=str, default="20,12,8", show_default=True)
@_split_opt
@_seed_opt
@_out_opt
@_guard
def train(data_path, kind, max_depth, min_leaf, epochs, hidden, test_fraction, seed, out_dir):
    """Train a classifier; write model.json and metrics.json."""
    _, tr, te = _split(data_path, test_fraction, seed)
    t0 = time.perf_counter()
    if kind == "dt":
        params = {"max_depth": max_depth, "min_leaf_size": min_leaf}
    elif kind == "lr":
        params = {}
    else:
        params = {"hidden": tuple(int(h) for h in hidden.split(",")), "epochs": epochs, "seed": seed}
    model = dcm_mod.train(kind, tr, **params)
    t1 = time.perf_counter()
    prov = provenance(seed, {"data": data_path}, test_fraction=test_fraction,
                      params={k: list(v) if isinstance(v, tuple) else v for k, v in params.items()})
    out = Path(out_dir)
    dcm_mod.save_model(model, out / "model.json", prov)
    click.echo(f"wrote {out / 'model.json'}")
    pred = model.predict_batch(te.X)
    cm = dcm_mod.confusion_matrix(te.y, pred, tr.schema.n_l)
    m = dcm_mod.metrics_from_confusion(cm)
    _write_json(out / "metrics.json", {**m.to_dict(), "confusion": cm.tolist(), "labels": list(tr.schema.label_names),
                                       "n_test": len(te), "timings": {"training": t1 - t0}, "provenance": prov})


@main.command()
@_data_opt
@click.option("--adm", "algorithm", type=click.Choice(["dbscan", "kmeans"]), default="dbscan", show_default=True)
@click.option("--max-noise", type=float, default=AtlasParams.max_noise_fraction, show_default=True)
@click.option("--epsilon", type=float, default=None)
@click.option("--min-points", type=int, default=None)
@click.option("--k", type=int, default=None)
@_split_opt
@_seed_opt
@_out_opt
@_guard
def atlas(data_path, algorithm, max_noise, epsilon, min_points, k, test_fraction, seed, out_dir):
    """Cluster every (label, sensor pair) projection; write atlas.json and atlas_report.json."""
    _, tr, te = _split(data_path, test_fraction, seed)
    params = AtlasParams(algorithm=algorithm, epsilon=epsilon, min_points=min_points,
                         max_noise_fraction=max_noise, k=k, seed=seed)
    at = build_atlas(tr, algorithm, params)
    out = Path(out_dir)
    prov = provenance(seed, {"data": data_path}, test_fraction=test_fraction, params=params.to_dict())
    _write_text(out / "atlas.json", json.dumps({**at.to_dict(), "provenance": prov}, sort_keys=True) + "\n")
    keys = [k_ for k_, e in at.entries.items() if not e.vacuous]
    cov = coverage(tr, at)
    _write_json(out / "atlas_report.json", {
        "coverage": cov, "coverage_test": coverage(te, at), "n_train": len(tr),
        "keys": len(keys), "vacuous_keys": len(at.entries) - len(keys),
        "polygons": sum(len(e.polygons) for e in at.entries.values()),
        "degenerate_polygons": sum(sum(e.degenerate) for e in at.entries.values()),
        "timings": at.timings, "provenance": prov})
    click.echo(f"training coverage {cov:.4f}")


def _load_models(model_path, atlas_path):
    model = dcm_mod.load_model(model_path)
    at = ClusterAtlas.from_dict(json.loads(Path(atlas_path).read_text()))
    return model, at


def _pick_patients(ds, model, at, only=None):
    """First record per label (dataset order) whose baseline both models accept."""
    out = {}
    pred = model.predict_batch(ds.X)
    for j in range(at.schema.n_l):
        if only is not None and j != only:
            continue
        idx = np.flatnonzero((ds.y == j) & (pred == j))
        if len(idx):
            ok = idx[consistent_batch(ds.X[idx], j, at)]
            if len(ok):
                i = int(ok[0])
                out[j] = (i, ds.record(i))
                continue
        logging.getLogger(__name__).warning("no usable baseline for label %d; skipped", j)
    return out


def _one_patient(ds, model, at, patient, source):
    if patient is None:
        picked = _pick_patients(ds, model, at, source)
        if not picked:
            raise click.UsageError("no record has a baseline accepted by both models")
        j, (i, rec) = next(iter(picked.items()))
        return i, rec, j
    if not 0 <= patient < len(ds):
        raise click.BadParameter(f"patient index {patient} outside 0..{len(ds) - 1}")
    rec = ds.record(patient)
    j = model.predict(rec.measurements) if source is None else source
    return patient, rec, j


def _common(data_path, model_path, atlas_path, backend, solver_path, timeout, seed):
    ds = load_csv(data_path)
    model, at = _load_models(model_path, atlas_path)
    be = backend_by_name(backend, solver_path, timeout, seed)
    inputs = {"data": data_path, "model": model_path, "atlas": atlas_path}
    return ds, model, at, be, inputs


_attack_common = [_data_opt, _model_opt, _atlas_opt, _backend_opts, _seed_opt, _out_opt]


def _apply(opts):
    def deco(fn):
        for o in reversed(opts):
            fn = o(fn)
        return fn
    return deco


@main.command()
@_apply(_attack_common)
@click.option("--patient", type=int, default=None, help="Row index in the dataset.")
@click.option("--source", type=int, default=None)
@click.option("--target", type=int, required=True)
@click.option("--ladder", type=str, default="default", show_default=True,
              help="'default' or comma-separated MAX_SENSORS:THRESHOLD rungs.")
@_guard
def attack(data_path, model_path, atlas_path, backend, solver_path, timeout, seed, out_dir,
           patient, source, target, ladder):
    """Escalate one attack goal along the capability ladder."""
    ds, model, at, be, inputs = _common(data_path, model_path, atlas_path, backend, solver_path, timeout, seed)
    pid, rec, j = _one_patient(ds, model, at, patient, source)
    rungs = _parse_ladder(ladder, at.schema.n_s)
    t0 = time.perf_counter()
    esc = escalate(rec, j, target, rungs, model, at, be)
    doc = esc.to_dict()
    if esc.vector is not None:
        doc["vector"]["patient"] = pid
        doc["vector"]["validated"] = validate_attack(esc.vector, model, at)
    _write_json(Path(out_dir) / "attack.json", {
        "result": doc, "patient": pid, "j": j, "j_bar": target,
        "timings": {**esc.seconds, "total": time.perf_counter() - t0},
        "provenance": provenance(seed, inputs, backend=be.describe())})
    click.echo(f"{j} -> {target}: {esc.status}"
               + (f" at {esc.capability.max_sensors} sensors, {esc.capability.threshold:g}" if esc.capability else ""))


@main.command()
@_apply(_attack_common)
@click.option("--patient", type=int, default=None,
              help="Row index; without it one patient per label fills the whole matrix.")
@click.option("--ladder", type=str, default="default", show_default=True)
@_guard
def matrix(data_path, model_path, atlas_path, backend, solver_path, timeout, seed, out_dir, patient, ladder):
    """Escalate every off-diagonal attack goal."""
    ds, model, at, be, inputs = _common(data_path, model_path, atlas_path, backend, solver_path, timeout, seed)
    if patient is None:
        patients = _pick_patients(ds, model, at)
    else:
        pid, rec, j = _one_patient(ds, model, at, patient, None)
        patients = {j: (pid, rec)}
    rungs = _parse_ladder(ladder, at.schema.n_s)
    t0 = time.perf_counter()
    m = attack_matrix(patients, rungs, model, at, be)
    doc = m.to_dict()
    for j, row in enumerate(doc["cells"]):
        for cell in row:
            if cell.get("vector"):
                cell["vector"]["patient"] = patients[j][0]
    timings = {}
    for e in m.cells.values():
        for k, v in e.seconds.items():
            timings[k] = timings.get(k, 0.0) + v
    timings["total"] = time.perf_counter() - t0
    _write_json(Path(out_dir) / "matrix.json", {**doc, "timings": timings,
                                                "provenance": provenance(seed, inputs, backend=be.describe())})


@main.command("resiliency")
@_apply(_attack_common)
@click.option("--patient", type=int, default=None)
@click.option("--source", type=int, default=None)
@click.option("--target", type=int, required=True)
@click.option("--max-r", type=int, default=None, help="Largest sensor count to certify (default: all).")
@click.option("--threshold", type=float, default=0.30, show_default=True)
@_guard
def resiliency_cmd(data_path, model_path, atlas_path, backend, solver_path, timeout, seed, out_dir,
                   patient, source, target, max_r, threshold):
    """Certify how many sensors an attacker needs for one goal."""
    ds, model, at, be, inputs = _common(data_path, model_path, atlas_path, backend, solver_path, timeout, seed)
    pid, rec, j = _one_patient(ds, model, at, patient, source)
    t0 = time.perf_counter()
    rep = resiliency(rec, j, target, max_r or at.schema.n_s, threshold, model, at, be)
    _write_json(Path(out_dir) / "resiliency.json", {
        **rep.to_dict(), "patient": pid, "timings": {"total": time.perf_counter() - t0},
        "provenance": provenance(seed, inputs, backend=be.describe())})
    click.echo(f"{j} -> {target}: {rep.r}-resilient at threshold {threshold:g}")


@main.command()
@_apply(_attack_common)
@click.option("--patient", type=int, default=None)
@click.option("--thresholds", type=str, default="0.05,0.1,0.15,0.2,0.25,0.3", show_default=True)
@_guard
def report(data_path, model_path, atlas_path, backend, solver_path, timeout, seed, out_dir, patient, thresholds):
    """Feasibility counts over the capability grid, sensor frequencies and timings."""
    ds, model, at, be, inputs = _common(data_path, model_path, atlas_path, backend, solver_path, timeout, seed)
    pid, rec, j = _one_patient(ds, model, at, patient, None)
    ts = tuple(float(t) for t in thresholds.split(","))
    t0 = time.perf_counter()
    grid = feasibility_grid(rec, j, model, at, be, thresholds=ts)
    elapsed = time.perf_counter() - t0
    doc = grid_report(grid, at.schema.sensor_names, at.schema.label_names)
    timings = {"total": elapsed, "clustering": at.timings.get("clustering", 0.0),
               "hull": at.timings.get("hull", 0.0)}
    out = Path(out_dir)
    _write_json(out / "report.json", {**doc, "patient": pid, "j": j, "timings": timings,
                                      "provenance": provenance(seed, inputs, backend=be.describe())})
    _write_text(out / "counts.csv", counts_csv(grid))
    _write_text(out / "frequency.csv", frequency_csv(frequency_report(grid.vectors(), at.schema.sensor_names)))
    _write_text(out / "timings.csv", timings_csv(timings))


if __name__ == "__main__":  # pragma: no cover
    main()
