import json
import subprocess
import sys

import pytest

from ornstein import laminate, operators, witness
from ornstein.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_decide_hessian_pair_exact_output(capsys):
    code, out = run(capsys, "decide", "--p1", "hess-offdiag", "--p2", "hess-diag")
    assert code == 0
    doc = json.loads(out)
    assert doc == {
        "factorization": None,
        "counterexample": [0.0, 0.7071067811865476, 0.7071067811865476, 0.0],
        "verdict": "no_constant_exists",
    }


def test_decide_factorizable(capsys):
    code, out = run(capsys, "decide", "--p1", "sym-grad", "--p2", "grad")
    doc = json.loads(out)
    assert code == 0
    assert doc["residual"] <= 1e-10
    assert len(doc["factorization"]["rows"]) == 3


def test_laminate_make_and_check_round_trip(capsys, tmp_path):
    code, out = run(capsys, "laminate-make", "--matrix", "1,0,0,1")
    assert code == 0
    doc = json.loads(out)
    weights = sorted((w["weight"]["num"], w["weight"]["den"]) for w in doc["atoms"])
    assert weights == [(1, 2), (1, 3), (1, 6)]
    assert laminate.validate(laminate.from_json(doc)).passed
    path = tmp_path / "nu.json"
    path.write_text(out)
    code, out = run(capsys, "laminate-check", "--laminate", str(path))
    assert code == 0 and json.loads(out)["passed"] is True


def test_inline_operator_json(capsys):
    op = json.dumps({"domain": "full", "rows": [[1, 0, 0, 1]]})
    code, out = run(capsys, "constant", "--p1", op, "--p2", "grad")
    assert code == 0
    assert json.loads(out)["constant"] == pytest.approx(2**0.5)


def test_factor_and_constant_for_failing_pair(capsys):
    code, out = run(capsys, "factor", "--p1", "grad", "--p2", "sym-grad")
    assert code == 1
    assert json.loads(out)["error"] == "no_factorization"
    code, out = run(capsys, "constant", "--p1", "grad", "--p2", "sym-grad")
    assert code == 0
    assert json.loads(out) == {"constant": "inf", "bounded": False}


def test_svd(capsys):
    code, out = run(capsys, "svd", "--matrix", "3,0,0,-2")
    assert code == 0
    assert json.loads(out)["sigma"] == [3.0, 2.0]


def test_domain_errors_exit_one(capsys):
    code, out = run(capsys, "laminate-make", "--matrix", "0,0,0,0")
    assert code == 1
    assert json.loads(out)["error"] == "zero_matrix"
    code, out = run(capsys, "decide", "--p1", "nope", "--p2", "grad")
    assert code == 1
    assert json.loads(out)["error"] == "unknown_operator"
    code, out = run(capsys, "decide", "--p1", "grad", "--p2", "hess-diag")
    assert json.loads(out)["error"] == "domain_mismatch"


def test_usage_errors_exit_two(capsys):
    assert main(["svd", "--matrix", "1,2"]) == 2
    assert main(["laminate-check", "--laminate", "{not json"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["svd", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_witness_csv(capsys):
    code, out = run(capsys, "witness", "--depth", "2", "--layer", "0.2", "--matrix", "1,0,0,1", "--csv", "-")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "depth,l1_p1,l1_p2,ratio,predicted_mean_f,measured_mean_f"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["1", "2"]


def test_witness_field_export(capsys, tmp_path):
    field = tmp_path / "field.json"
    code, _ = run(capsys, "witness", "--depth", "1", "--layer", "0.2", "--matrix", "1,0,0,1", "--field", str(field))
    assert code == 0
    back = witness.from_json(json.loads(field.read_text()))
    assert back.region_count() > 0


def test_witness_field_too_large(capsys, tmp_path):
    code, out = run(capsys, "witness", "--depth", "2", "--layer", "0.2", "--matrix", "1,0,0,1", "--field", str(tmp_path / "f.json"))
    assert code == 1
    assert json.loads(out)["error"] == "field_too_large"


def test_witness_json_defaults_to_counterexample(capsys):
    code, out = run(capsys, "witness", "--depth", "2", "--layer", "0.1")
    doc = json.loads(out)
    assert code == 0
    assert doc["matrix"] == pytest.approx([0.0, 0.7071067811865476, -0.7071067811865476, 0.0])
    assert doc["reports"][1]["ratio"] > doc["reports"][0]["ratio"]


def test_witness_second_order(capsys):
    code, out = run(capsys, "witness", "--second-order", "--depth", "1", "--grid", "256")
    assert code == 0
    doc = json.loads(out)
    assert {"ratio", "richardson_error", "predicted_ratio"} <= set(doc)


def test_envelope_small(capsys, tmp_path):
    dump = tmp_path / "grid.csv"
    code, out = run(capsys, "envelope", "--p1", "grad", "--p2", "sym-grad", "--constant", "10", "--nodes", "256", "--dirs", "3,3", "--dump", str(dump))
    assert code == 0
    doc = json.loads(out)
    assert doc["verdict"] == "unbounded_below"
    assert set(doc) == {"verdict", "min_value", "argmin_matrix", "iterations", "wall_time"}
    assert dump.read_text().startswith("a11,a12,a21,a22,value")


def test_envelope_bad_config(capsys):
    code, out = run(capsys, "envelope", "--p1", "grad", "--p2", "grad", "--constant", "1", "--dirs", "3")
    assert code == 1
    assert json.loads(out)["error"] == "config_invalid"


def test_output_is_byte_deterministic():
    cmd = [sys.executable, "-m", "ornstein.cli", "laminate-make", "--matrix", "0.3,-1.2,2.5,0.7", "--depth", "3"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b
    doc = json.loads(a)
    assert laminate.validate(laminate.from_json(doc), 1e-10).passed


def test_operator_json_reader_accepts_catalog_dump():
    for op in operators.CATALOG.values():
        text = json.dumps(operators.to_json(op))
        assert operators.from_json(json.loads(text)).name == op.name
