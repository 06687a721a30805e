"""End-to-end tests for the batch CLI: exit codes, report shape, determinism."""

import json
import math

import numpy as np
import pytest

from framex import cli, gaussian_window, pointsets, selectors

ROOT5 = math.sqrt(0.2)


def write_json(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def mercedes_payload():
    r3 = math.sqrt(3.0) / 2.0
    return {
        "dim": 2,
        "field": "real",
        "vectors": [[0.0, 1.0], [-r3, -0.5], [r3, -0.5]],
    }


def scaled_basis_payload(dim=3, scalars=True):
    vecs = (ROOT5 * np.eye(dim)).tolist()
    out = {"dim": dim, "field": "real", "vectors": vecs}
    if scalars:
        out["scalars"] = [1.0] * dim
    return out


def window_payload(length=16):
    g = gaussian_window(length)
    return {"dim": length, "field": "real", "vectors": [g.samples.real.tolist()]}


def run_cli(tmp_path, command, payload, *extra, name="in.json", out="out.json"):
    src = write_json(tmp_path / name, payload)
    dst = tmp_path / out
    code = cli.main([command, "--in", src, "--out", str(dst), *extra])
    report = json.loads(dst.read_text(encoding="utf-8"))
    return code, report, dst


def test_analyze_mercedes(tmp_path):
    code, report, _ = run_cli(tmp_path, "analyze", mercedes_payload())
    assert code == 0
    res = report["results"]
    assert res["frame"]["lower"] == pytest.approx(1.5)
    assert res["frame"]["upper"] == pytest.approx(1.5)
    assert res["count"] == 3 and res["dim"] == 2
    assert report["command"] == "analyze"
    assert "timestamp" in report and "wall_time_s" in report
    assert report["versions"]["framex"]


def test_classify_and_dual(tmp_path):
    code, report, _ = run_cli(tmp_path, "classify", mercedes_payload())
    assert code == 0
    assert report["results"]["label"] == "frame"
    assert report["results"]["spanning"] is True

    code, report, _ = run_cli(tmp_path, "dual", mercedes_payload())
    assert code == 0
    assert report["results"]["max_relative_residual"] < 1e-9


def test_extract_reports_are_byte_identical(tmp_path):
    payload = mercedes_payload()
    bodies = []
    for k in range(2):
        _, _, dst = run_cli(
            tmp_path, "extract", payload, "--no-timestamp", out=f"rep{k}.json"
        )
        bodies.append(dst.read_bytes())
    assert bodies[0] == bodies[1]
    report = json.loads(bodies[0])
    assert "timestamp" not in report and "wall_time_s" not in report
    assert report["results"]["mult_ok"] is True


def test_sample_command(tmp_path):
    code, report, _ = run_cli(
        tmp_path, "sample", scaled_basis_payload(), "--param", "epsilon=0.25"
    )
    assert code == 0
    res = report["results"]
    assert res["total"] > 0
    assert res["certificate"]["sandwich_ok"] is True
    assert res["certificate"]["mult_ok"] is True


def test_sample_requires_epsilon_and_scalars(tmp_path):
    code, report, _ = run_cli(tmp_path, "sample", scaled_basis_payload())
    assert code == 2
    assert report["error"]["type"] == "PreconditionError"

    code, report, _ = run_cli(
        tmp_path,
        "sample",
        scaled_basis_payload(scalars=False),
        "--param",
        "epsilon=0.25",
    )
    assert code == 2


def test_sample_budget_exhaustion(tmp_path):
    # a subspace orthogonal to the operator zeroes gamma, forcing the
    # dyadic expansion of 1/3 to stay symbolic far past the budget
    payload = {
        "dim": 2,
        "field": "real",
        "vectors": [[ROOT5, 0.0]],
        "scalars": [1.0 / 3.0],
    }
    code, report, _ = run_cli(
        tmp_path,
        "sample",
        payload,
        "--param",
        "epsilon=0.25",
        "--param",
        "subspace_cols=1",
    )
    assert code == 4
    assert report["error"]["type"] == "BudgetExceededError"


def test_selector_command_and_budget_override(tmp_path):
    code, report, _ = run_cli(tmp_path, "selector", scaled_basis_payload())
    assert code == 0
    assert report["results"]["certificate"]["satisfied"] is True
    assert report["results"]["leaves"]

    before = selectors.EXHAUSTIVE_LIMIT
    code, report, _ = run_cli(
        tmp_path,
        "selector",
        scaled_basis_payload(),
        "--param",
        "strategy=exhaustive",
        "--param",
        "exhaustive_limit=1",
    )
    assert code == 4
    assert report["error"]["type"] == "BudgetExceededError"
    # the tunable override is restored once the job finishes
    assert selectors.EXHAUSTIVE_LIMIT == before


def test_density_command(tmp_path):
    payload = {
        "ambient_dim": 1,
        "points": [[float(k)] for k in range(-20, 21)],
        "extent": 20.0,
    }
    code, report, _ = run_cli(tmp_path, "density", payload, "--param", "radii=8")
    assert code == 0
    res = report["results"]
    assert res["estimate"]["lower"] == pytest.approx(1.0)
    assert res["estimate"]["upper"] == pytest.approx(17.0 / 16.0)
    assert res["uniformly_discrete"] is True
    assert res["separation"] == pytest.approx(1.0)
    assert pointsets.STEP_DIVISOR == 20


def test_gabor_command(tmp_path):
    code, report, _ = run_cli(tmp_path, "gabor", window_payload(8))
    assert code == 0
    res = report["results"]
    assert res["count"] == 64
    assert res["frame"]["lower"] == pytest.approx(8.0, rel=1e-8)
    assert res["frame"]["upper"] == pytest.approx(8.0, rel=1e-8)


def test_construct45_command(tmp_path):
    code, report, _ = run_cli(
        tmp_path,
        "construct45",
        window_payload(16),
        "--param",
        "counts=1,2,4",
        "--param",
        "copies=4",
    )
    assert code == 0
    res = report["results"]
    assert res["base_count"] == 1024
    assert res["report"]["emitted_count"] == 1028
    assert res["report"]["operator_deviation"] < 1.0
    assert res["report"]["weights_nonzero"] is True
    assert res["base_frame"]["lower"] == pytest.approx(64.0, rel=1e-8)
    assert res["emitted_frame"]["is_frame"] is True


def test_invalid_json_input(tmp_path):
    src = tmp_path / "bad.json"
    src.write_text("this is not json", encoding="utf-8")
    dst = tmp_path / "out.json"
    code = cli.main(["analyze", "--in", str(src), "--out", str(dst)])
    assert code == 3
    report = json.loads(dst.read_text(encoding="utf-8"))
    assert report["error"]["type"] == "InputFormatError"


def test_missing_input_file(tmp_path):
    dst = tmp_path / "out.json"
    code = cli.main(["analyze", "--in", str(tmp_path / "absent.json"), "--out", str(dst)])
    assert code == 3


def test_schema_violations(tmp_path):
    cases = [
        {"field": "real", "vectors": [[1.0]]},  # missing dim
        {"dim": 1, "field": "imaginary", "vectors": [[1.0]]},
        {"dim": 2, "field": "real", "vectors": [[1.0]]},  # wrong arity
        {"dim": 1, "field": "complex", "vectors": [[1.0]]},  # not [re, im]
        {"dim": 1, "field": "real", "vectors": [[1.0]], "scalars": [1.0, 2.0]},
    ]
    for k, payload in enumerate(cases):
        code, report, _ = run_cli(
            tmp_path, "analyze", payload, name=f"in{k}.json", out=f"out{k}.json"
        )
        assert code == 3, payload
        assert report["error"]["type"] == "InputFormatError"


def test_bad_param_values(tmp_path):
    code, report, _ = run_cli(
        tmp_path, "sample", scaled_basis_payload(), "--param", "epsilon=abc"
    )
    assert code == 3

    src = write_json(tmp_path / "fam.json", mercedes_payload())
    code = cli.main(
        ["analyze", "--in", src, "--out", str(tmp_path / "o.json"), "--param", "oops"]
    )
    assert code == 3


def test_csv_output(tmp_path):
    payload = mercedes_payload()
    src = write_json(tmp_path / "in.json", payload)
    dst = tmp_path / "report.json"
    code = cli.main(["analyze", "--in", src, "--out", str(dst), "--csv"])
    assert code == 0
    table = (tmp_path / "report.csv").read_text(encoding="utf-8").splitlines()
    assert table[0] == "key,value"
    keys = {line.split(",", 1)[0] for line in table[1:]}
    assert "frame.lower" in keys
    assert "spectrum.top" in keys or any(k.startswith("spectrum") for k in keys)


def test_csv_skipped_on_failure(tmp_path):
    src = tmp_path / "bad.json"
    src.write_text("{", encoding="utf-8")
    dst = tmp_path / "report.json"
    code = cli.main(["analyze", "--in", str(src), "--out", str(dst), "--csv"])
    assert code == 3
    assert not (tmp_path / "report.csv").exists()


def test_unknown_command_rejected(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["frobnicate", "--in", "x", "--out", "y"])
