import json
import os
import pathlib
import subprocess

import jsonschema
import pytest
import yaml

ROOT = pathlib.Path(os.environ.get("GAMMA_ELLIPTIC_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
CLI = os.environ.get("GAMMA_ELLIPTIC_CLI")
SCHEMAS = {p.name.split(".")[0]: json.loads(p.read_text()) for p in (ROOT / "schemas").glob("*.schema.json")}
CONFIGS = sorted((ROOT / "configs").glob("*.yaml"))

needs_cli = pytest.mark.skipif(not CLI, reason="GAMMA_ELLIPTIC_CLI is not set")

# Exit status each example config is expected to produce.
EXPECTED_STATUS = {"sphere_check_no_reaction.yaml": 2}


def run_cli(task, config, out, *flags):
    return subprocess.run(
        [CLI, task, "--config", str(config), "--out", str(out), *flags],
        capture_output=True,
        text=True,
        timeout=600,
    )


def validate_outputs(out):
    documents = sorted(out.glob("*.json"))
    assert documents, f"no JSON written to {out}"
    for path in documents:
        doc = json.loads(path.read_text())
        jsonschema.validate(doc, SCHEMAS[doc["schema"]])
    return documents


def test_schemas_are_well_formed():
    assert set(SCHEMAS) == {"mesh", "conditions", "solve", "study", "lp", "export"}
    for schema in SCHEMAS.values():
        jsonschema.Draft202012Validator.check_schema(schema)


def test_example_configs_are_plain_yaml_mappings():
    assert len(CONFIGS) >= 5
    for path in CONFIGS:
        doc = yaml.safe_load(path.read_text())
        assert isinstance(doc, dict)
        assert doc["task"] in {"solve", "study", "check", "mesh", "export"}


@needs_cli
@pytest.mark.parametrize("config", CONFIGS, ids=lambda p: p.stem)
def test_example_config_outputs_match_schema(config, tmp_path):
    task = yaml.safe_load(config.read_text())["task"]
    result = run_cli(task, config, tmp_path, "--deterministic")
    assert result.returncode == EXPECTED_STATUS.get(config.name, 0), result.stdout + result.stderr
    validate_outputs(tmp_path)


@needs_cli
def test_deterministic_runs_are_byte_identical(tmp_path):
    config = ROOT / "configs" / "torus_general_solve.yaml"
    for name in ("a", "b"):
        assert run_cli("solve", config, tmp_path / name, "--deterministic").returncode == 0
    for file in ("solve.json", "solution.csv", "solution.vtk"):
        assert (tmp_path / "a" / file).read_bytes() == (tmp_path / "b" / file).read_bytes()


@needs_cli
def test_violation_report_validates(tmp_path):
    config = tmp_path / "bad.yaml"
    config.write_text('problem: general\ncoefficients: {d: "0"}\nload: "1"\n')
    result = run_cli("solve", config, tmp_path / "out", "--deterministic")
    assert result.returncode == 2
    (doc,) = [json.loads(p.read_text()) for p in validate_outputs(tmp_path / "out")]
    assert doc["status"] == "violated"


@needs_cli
def test_parse_errors_exit_64(tmp_path):
    config = tmp_path / "bad.yaml"
    config.write_text("surface: {preset: klein-bottle}\n")
    result = run_cli("mesh", config, tmp_path / "out")
    assert result.returncode == 64
    assert "klein-bottle" in result.stderr


def test_binding_module():
    ge = pytest.importorskip("gamma_elliptic")
    summary = ge.mesh_summary("sphere-icosahedral", 1)
    assert (summary["vertices"], summary["triangles"], summary["euler_characteristic"]) == (42, 80, 2)
    assert "sphere-eigen" in ge.builtin_cases()
    assert ge.evaluate("x1*x2 + x3", [2.0, 3.0, 1.0]) == pytest.approx(7.0)
    with pytest.raises(ge.ParseError):
        ge.evaluate("1 + * x1", [0.0, 0.0, 0.0])

    solved = ge.solve_builtin("sphere-eigen", resolution=3)
    assert solved["converged"]
    assert len(solved["solution"]) == 642
    assert solved["error_l2"] < 1e-2

    report = ge.convergence_study("sphere-eigen", levels=3)
    assert report["passed"]
    assert 1.9 <= report["rates"]["l2"] <= 2.1

    conditions = ge.check_conditions("sphere-reaction")
    assert conditions["reaction"]["condition_a"] == "holds-sufficiently"
