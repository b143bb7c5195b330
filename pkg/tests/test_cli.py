import json
import subprocess
import sys

import numpy as np
import pytest

from extremal_sv.cli import main, parse_lags


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def body(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


@pytest.fixture
def ar1(tmp_path):
    p = tmp_path / "ar1.json"
    p.write_text(json.dumps({"coeffs": [0.5 ** i for i in range(25)], "eta": {"kind": "laplace"},
                             "eps": {"kind": "normal"}}))
    return p


def test_parse_lags():
    assert parse_lags("1..5") == [1, 2, 3, 4, 5]
    assert parse_lags("1,2") == [1, 2]


def test_eta_csv(capsys, ar1):
    code, out, _ = run(capsys, "eta", "--model", str(ar1), "--lags", "1..5", "--no-timestamp")
    assert code == 0
    rows = body(out)
    assert rows[0] == "h,eta,kappa_sum,case"
    assert len(rows) == 6
    h, eta, ks, case = rows[1].split(",", 3)
    assert int(h) == 1 and float(eta) == pytest.approx(1 / 1.5) and float(ks) == pytest.approx(1.5)
    assert case.strip('"') == "TwoFactor(0,1)"


def test_provenance_header(capsys, ar1):
    _, out, _ = run(capsys, "eta", "--model", str(ar1), "--seed", "7")
    head = [line for line in out.splitlines() if line.startswith("#")]
    keys = {line[2:].split("=")[0] for line in head}
    assert {"version", "seed", "config_hash", "timestamp"} <= keys
    assert head[-1].startswith("# timestamp=")


def test_construct_round_trip(capsys, tmp_path):
    m = tmp_path / "model.json"
    assert run(capsys, "construct", "--eta", "0.8,0.5", "--out", str(m))[0] == 0
    code, out, _ = run(capsys, "eta", "--model", str(m), "--lags", "1,2", "--format", "json")
    res = json.loads(out)["result"]
    assert [r["eta"] for r in res] == pytest.approx([0.8, 0.5], abs=1e-12)


def test_tau(capsys):
    code, out, _ = run(capsys, "tau", "--matrix", "[[2,0],[0,3]]")
    assert code == 0 and body(out) == ["tau", "3"]
    code, out, _ = run(capsys, "tau", "--matrix", "[[1,1],[0,1]]", "--format", "json")
    assert json.loads(out)["result"]["tau"] == float("inf")


def test_lp_solve(capsys, tmp_path):
    p = tmp_path / "lp.json"
    p.write_text('{"a": [1, 0.5], "b": [0.5, 1]}')
    code, out, _ = run(capsys, "lp-solve", "--lp", str(p))
    res = json.loads(out)["result"]
    assert code == 0 and res["objective"] == pytest.approx(4 / 3) and res["unique"]
    code, out, _ = run(capsys, "lp-solve", "--lp", '{"a": [1, 1], "b": [1, 1]}', "--format", "csv")
    assert "# case=NonUnique" in out


def test_measure(capsys, ar1):
    code, out, _ = run(capsys, "measure", "--model", str(ar1), "--h", "1", "--grid", "4:2,1:1")
    rows = body(out)
    assert rows[0] == "s0,sh,value,stderr"
    assert float(rows[1].split(",")[2]) == pytest.approx(0.25)


def test_measure_one_factor(capsys, tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"coeffs": [1, 0, 1], "eta": {"kind": "laplace"}, "eps": {"kind": "normal"}}')
    code, out, _ = run(capsys, "measure", "--model", str(p), "--h", "2", "--grid", "1:1,2:1", "--mc-samples", "20000")
    assert code == 0
    assert float(body(out)[1].split(",")[2]) == 1.0


def test_measure_unsupported(capsys, tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"coeffs": [1, 1, 1], "eta": {"kind": "laplace"}, "eps": {"kind": "normal"}}')
    code, _, err = run(capsys, "measure", "--model", str(p), "--h", "1")
    assert code == 2 and "NonUnique" in json.loads(err)["error"]


def test_simulate_and_estimate(capsys, ar1, tmp_path):
    b1, b2 = tmp_path / "b1.npz", tmp_path / "b2.npz"
    common = ["--model", str(ar1), "--T", "50000", "--R", "2", "--seed", "3", "--no-timestamp"]
    assert run(capsys, "simulate", *common, "--out", str(b1))[0] == 0
    assert run(capsys, "simulate", *common, "--out", str(b2), "--workers", "2")[0] == 0
    assert b1.read_bytes() == b2.read_bytes()
    code, out, _ = run(capsys, "estimate", "--batch", str(b1), "--h", "1..2", "--k", "200", "--u", "0.99")
    rows = body(out)
    assert code == 0 and rows[0].startswith("quantity,h")
    assert sum(r.startswith("eta,") for r in rows) == 2
    assert sum(r.startswith("theta,") for r in rows) == 1


def test_simulate_csv(capsys, ar1):
    code, out, _ = run(capsys, "simulate", "--model", str(ar1), "--T", "4", "--format", "csv")
    rows = body(out)
    assert rows[0] == "r,t,sigma,x" and len(rows) == 5


def test_idempotent_outputs(capsys, ar1, tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        p = tmp_path / name
        run(capsys, "eta", "--model", str(ar1), "--lags", "1..3", "--out", str(p), "--no-timestamp")
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_verify_exact_subset(capsys, tmp_path):
    p = tmp_path / "v.csv"
    code, out, _ = run(capsys, "verify", "--checks", "1..3", "--out", str(p))
    assert code == 0
    assert out.count("[PASS]") == 3
    assert body(p.read_text())[0] == "check,row,key,value"


@pytest.mark.parametrize("argv", [
    ["bogus"],
    [],
    ["eta", "--model", "/nonexistent.json"],
    ["eta", "--lags", "1..2"],
    ["tau", "--matrix", "[[1, 2]]"],
    ["tau", "--matrix", "not json"],
    ["lp-solve", "--lp", '{"a": [0], "b": [1]}'],
    ["construct", "--eta", "0.3"],
    ["verify", "--checks", "12"],
])
def test_validation_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "error" in json.loads(err.strip().splitlines()[-1])


def test_entry_point_module():
    out = subprocess.run([sys.executable, "-m", "extremal_sv.cli", "tau", "--matrix", "[[1]]"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and body(out.stdout) == ["tau", "1"]
