import json

import pytest

from cstarindex.cli import config_from_args, main


def run(tmp_path, *args):
    out = tmp_path / "r.json"
    code = main([*args, "--out", str(out), "--no-timestamp"])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_saturate_expectations(tmp_path):
    code, doc = run(tmp_path, "--model", "rotation_circle", "--task", "saturate", "--expect", "saturated", "--no-figures")
    assert code == 0 and doc["saturation"]["verdict"] == "SATURATED_AT_TRUNCATION"
    assert doc["compactness"]["verdict"] == "ISO"
    code, doc = run(tmp_path, "--model", "trivial_action", "--task", "saturate", "--expect", "saturated", "--no-figures")
    assert code == 2 and doc["saturation"]["witness_character"] == [1]


def test_pair_odd_with_figures(tmp_path):
    code, doc = run(tmp_path, "--model", "rotation_circle", "--task", "pair-odd", "--u", "z^2", "--N", "16", "--picture", "module")
    assert code == 0
    assert doc["pairing"]["oracle_value"] == 2 and doc["pairing"]["consistent"]
    assert (tmp_path / "r_eigenpath.png").exists()


def test_flow_csv_and_expect(tmp_path):
    csv = tmp_path / "f.csv"
    code, doc = run(tmp_path, "--model", "rotation_circle", "--task", "flow", "--u", "z'", "--picture", "module", "--csv", str(csv), "--expect", "-1", "--no-figures")
    assert code == 0 and doc["flow"]["value"] == -1
    assert csv.read_text().startswith("t,lambda_1")


def test_deterministic_without_timestamp(tmp_path):
    args = ["--model", "nc_torus:1/3", "--task", "trace-check", "--samples", "3", "--no-figures"]
    a = run(tmp_path, *args)[1]
    b = run(tmp_path, *args)[1]
    assert a == b and a["trace_identity"]["max_defect"] <= 1e-10


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "rotation_circle", "task": "calibrate", "k": 1}))
    c = config_from_args(["--config", str(cfg), "--k", "2"])
    assert c.task == "calibrate" and c.k == 2


def test_error_names_failing_identity(tmp_path, capsys):
    code, _ = run(tmp_path, "--model", "z_crossed_product", "--task", "pair-odd", "--u", "b1")
    assert code == 1
    assert "u*u = uu* = 1" in capsys.readouterr().err


@pytest.mark.parametrize("args", [["--task", "pair-odd", "--N", "0"], ["--model", "nope", "--task", "saturate"], ["--task", "flow", "--u", "q"]])
def test_bad_input_exit_code(tmp_path, args):
    assert run(tmp_path, *args)[0] == 1
