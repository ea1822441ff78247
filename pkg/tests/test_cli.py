import json
import os
import shutil
import stat

import jsonschema
import pytest
from click.testing import CliRunner

from conftest import needs_z3
from shsthreat.cli import main
from shsthreat.data import SyntheticConfig, default_synthetic_config
from shsthreat.threat.report import SCHEMAS


def run(*args, ok=True):
    res = CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)
    if ok:
        assert res.exit_code == 0, res.output
    return res


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Three sensors, three labels, small enough for every command to run quickly."""
    d = tmp_path_factory.mktemp("cli")
    base = default_synthetic_config()
    cfg = SyntheticConfig(base.sensor_names[:3], base.label_names[:3],
                          tuple(row[:3] for row in base.profiles[:3]), 240)
    (d / "cfg.json").write_text(json.dumps(cfg.to_dict()))
    run("generate", "--config", d / "cfg.json", "--out", d / "data.csv", "--seed", 3)
    run("train", "--data", d / "data.csv", "--dcm", "dt", "--out", d / "a", "--seed", 3)
    run("atlas", "--data", d / "data.csv", "--out", d / "a", "--seed", 3)
    return d


def load(path):
    return json.loads(path.read_text())


def test_generate_same_seed_same_bytes(workspace, tmp_path):
    run("generate", "--config", workspace / "cfg.json", "--out", tmp_path / "x.csv", "--seed", 3)
    assert (tmp_path / "x.csv").read_bytes() == (workspace / "data.csv").read_bytes()


def test_train_and_atlas_outputs(workspace, tmp_path):
    metrics = load(workspace / "a" / "metrics.json")
    jsonschema.validate(metrics, SCHEMAS["metrics"])
    assert len(metrics["confusion"]) == 3 and metrics["accuracy"] > 0.8
    jsonschema.validate(load(workspace / "a" / "atlas_report.json"), SCHEMAS["atlas_report"])
    assert load(workspace / "a" / "model.json")["provenance"]["seed"] == 3
    # a rerun reproduces the model and the atlas byte for byte
    run("train", "--data", workspace / "data.csv", "--dcm", "dt", "--out", tmp_path, "--seed", 3)
    run("atlas", "--data", workspace / "data.csv", "--out", tmp_path, "--seed", 3)
    for name in ("model.json", "atlas.json"):
        assert (tmp_path / name).read_bytes() == (workspace / "a" / name).read_bytes()


@pytest.mark.parametrize("kind", ["lr", "nn"])
def test_train_other_models(workspace, tmp_path, kind):
    run("train", "--data", workspace / "data.csv", "--dcm", kind, "--epochs", 5, "--out", tmp_path)
    assert load(tmp_path / "model.json")["kind"] == kind


def _analysis(workspace):
    a = workspace / "a"
    return ["--data", workspace / "data.csv", "--model", a / "model.json", "--atlas", a / "atlas.json"]


@needs_z3
def test_attack_matrix_resiliency_report(workspace, tmp_path):
    out = tmp_path / "o"
    run("attack", *_analysis(workspace), "--target", 1, "--ladder", "1:0.1,2:0.3,3:0.3", "--out", out)
    doc = load(out / "attack.json")
    jsonschema.validate(doc, SCHEMAS["attack"])
    if doc["result"]["vector"]:
        assert doc["result"]["vector"]["validated"]
    run("matrix", *_analysis(workspace), "--ladder", "1:0.2,3:0.3", "--out", out)
    m = load(out / "matrix.json")
    jsonschema.validate(m, SCHEMAS["matrix"])
    assert [m["cells"][i][i]["status"] for i in range(3)] == ["not-applicable"] * 3
    run("resiliency", *_analysis(workspace), "--target", 2, "--threshold", 0.3, "--out", out)
    jsonschema.validate(load(out / "resiliency.json"), SCHEMAS["resiliency"])
    run("report", *_analysis(workspace), "--thresholds", "0.1,0.3", "--out", out)
    rep = load(out / "report.json")
    jsonschema.validate(rep, SCHEMAS["report"])
    jsonschema.validate(rep["frequency"], SCHEMAS["frequency"])
    counts = (out / "counts.csv").read_text().splitlines()
    assert counts[0] == "max_sensors,0.1,0.3" and len(counts) == 1 + 3  # one row per sensor count
    assert [list(map(int, r.split(",")[1:])) for r in counts[1:]] == rep["counts"]
    assert (out / "frequency.csv").exists() and (out / "timings.csv").exists()


@needs_z3
def test_attack_output_is_reproducible(workspace, tmp_path):
    docs = []
    for name in ("x", "y"):
        run("attack", *_analysis(workspace), "--target", 2, "--ladder", "1:0.3,3:0.3", "--out", tmp_path / name)
        d = load(tmp_path / name / "attack.json")
        d.pop("timings")
        d["result"].pop("seconds")
        docs.append(d)
    assert docs[0] == docs[1]


def test_usage_errors_exit_2(workspace):
    assert run("attack", *_analysis(workspace), ok=False).exit_code == 2  # --target missing
    assert run("attack", *_analysis(workspace), "--target", 1, "--ladder", "x:y", ok=False).exit_code == 2
    assert run("train", "--data", workspace / "missing.csv", ok=False).exit_code == 2
    assert run("attack", *_analysis(workspace), "--target", 1, "--patient", 10 ** 6, ok=False).exit_code == 2


def test_missing_solver_exits_3(workspace, tmp_path):
    res = run("attack", *_analysis(workspace), "--target", 1, "--ladder", "1:0.1",
              "--solver-path", tmp_path / "no-such-solver", "--out", tmp_path, ok=False)
    assert res.exit_code == 3


def test_malformed_model_exits_3(workspace, tmp_path):
    fake = tmp_path / "fake"
    fake.write_text("#!/bin/sh\ncat > /dev/null\nprintf 'sat\\n((define-fun dP_0 () Real 12345.0))\\n'\n")
    fake.chmod(fake.stat().st_mode | stat.S_IEXEC)
    res = run("attack", *_analysis(workspace), "--target", 1, "--ladder", "1:0.1",
              "--solver-path", fake, "--out", tmp_path, ok=False)
    assert res.exit_code == 3


def test_analysis_errors_exit_1(workspace, tmp_path):
    res = run("attack", *_analysis(workspace), "--source", 0, "--patient", 0, "--target", 0,
              "--backend", "builtin", "--out", tmp_path, ok=False)
    assert res.exit_code == 1 and "InvalidGoal" in res.output
    res = run("resiliency", *_analysis(workspace), "--target", 1, "--backend", "builtin", "--out", tmp_path,
              ok=False)
    assert res.exit_code == 1 and "IncompleteBackend" in res.output
