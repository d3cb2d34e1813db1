import csv
import json
import re

import numpy as np
import pytest

from vbsqueeze.cli import SWEEP_COLUMNS, fmt, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_fmt():
    assert fmt(2.0) == "2.0"
    assert fmt(np.sinh(0.3) ** 2) == "0.0927326091"
    assert fmt(1 / 3) == "0.333333333"
    assert fmt(float("nan")) == "nan"
    assert fmt(3) == "3"


def test_flow(capsys):
    code, out, _ = run(capsys, "flow", "--n", "1", "--theta", "0.5", "--z", "1")
    assert (code, out.strip()) == (0, "2.0")
    code, out, _ = run(capsys, "flow", "--n", "-1", "--theta", "-0.5", "--z", "-1")
    assert (code, out.strip()) == (0, "-1.5")


def test_flow_pole(capsys):
    code, _, err = run(capsys, "flow", "--n", "1", "--theta", "1", "--z", "1")
    assert code == 3 and "pole" in err


def test_squeeze(capsys):
    code, out, _ = run(capsys, "squeeze", "--n", "0", "--theta", "0.3", "--dim", "64")
    assert code == 0
    N = float(re.search(r"N=(\S+)", out).group(1))
    assert abs(N - np.sinh(0.3) ** 2) < 1e-6


def test_eval(capsys):
    code, out, _ = run(capsys, "eval", "x1*p1 - p1*x1", "--dim", "32", "--sub", "8")
    assert code == 0
    assert out.startswith("≈ iI")
    assert float(out.split("residual")[1]) < 1e-12


def test_eval_two_mode_auto(capsys):
    code, out, _ = run(capsys, "eval", "X*P - P*X", "--dim", "16", "--sub", "4")
    assert code == 0 and out.startswith("≈ 0.5i·I")


def test_eval_errors(capsys):
    code, _, err = run(capsys, "eval", "a3")
    assert code == 2 and "column 1" in err
    code, _, err = run(capsys, "eval", "x1 +")
    assert code == 2 and "    ^" in err
    code, _, err = run(capsys, "eval", "X", "--mode", "one")
    assert code == 2


def test_verify_single(capsys):
    code, out, _ = run(capsys, "verify", "--dim", "128", "--sub", "16", "--n-range", "-1:2")
    assert code == 0
    rows = [l for l in out.splitlines() if l.startswith("closure")]
    assert len(rows) == 15
    assert all(float(l.split()[2]) < 1e-10 for l in rows)


def test_verify_laws(capsys):
    code, out, _ = run(capsys, "verify", "--dim", "128", "--sub", "8", "--n", "2", "--theta", "0.01")
    assert code == 0
    assert "n=2 x" in out and "unitarity" in out


def test_verify_tolerance_failure(capsys):
    # a coarse truncation cannot reproduce the closed form to 1e-6
    code, out, _ = run(capsys, "verify", "--dim", "8", "--sub", "4", "--n", "0", "--theta", "0.5")
    assert code == 1 and "FAIL" in out


def test_verify_domain_failure(capsys):
    code, _, err = run(capsys, "verify", "--dim", "32", "--sub", "4", "--n", "1", "--theta", "2")
    assert code == 3


def test_verify_bad_config(capsys):
    code, _, err = run(capsys, "verify", "--dim", "8", "--sub", "16")
    assert code == 2 and "subspace_dim" in err


def test_verify_two_mode(capsys):
    code, out, _ = run(capsys, "verify", "--dim", "64", "--sub", "8", "--mode", "two",
                       "--n", "0", "--theta", "0.3")
    assert code == 0
    bog = [l for l in out.splitlines() if l.startswith("bogoliubov")]
    assert {l.split()[1] for l in bog} == {"a1", "a2", "X", "dx", "P", "dp"}
    assert any(l.startswith("closure     mixed:") for l in out.splitlines())


def test_vb(capsys, tmp_path):
    path = tmp_path / "diag.csv"
    code, out, _ = run(capsys, "vb", "--n", "0", "--theta", "0.5", "--dim", "64",
                       "--trace", "partner", "--out", str(path))
    assert code == 0
    beta = [float(m) for m in re.findall(r"beta=(\S+)", out)]
    assert any(abs(b - (-2 * np.log(np.tanh(0.5)))) < 1e-6 for b in beta)
    assert "fit refused" in out  # the "-" route reduces to a pure state
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["level", "probability"]
    p = np.array([float(r[1]) for r in rows[1:]])
    assert abs(p[1] / p[0] - np.tanh(0.5) ** 2) < 1e-8


def test_vb_zero_theta(capsys):
    code, out, _ = run(capsys, "vb", "--n", "0", "--theta", "0", "--dim", "16", "--sub", "4")
    assert code == 0
    assert "degenerate: zero-temperature" in out


def test_vb_domain(capsys):
    code, _, err = run(capsys, "vb", "--n", "2", "--theta", "10", "--dim", "32")
    assert code == 3
    assert "eigenvalue" in err


def test_vb_io_failure(capsys, tmp_path):
    code, _, _ = run(capsys, "vb", "--theta", "0.1", "--dim", "16", "--sub", "4",
                     "--out", str(tmp_path / "missing" / "x.csv"))
    assert code == 4


def test_usage_errors(capsys):
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "flow", "--n", "1")[0] == 2
    assert run(capsys, "verify", "--n-range", "1-2")[0] == 2
    assert run(capsys, "--help")[0] == 0


@pytest.fixture
def sweep_config(tmp_path):
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps({
        "n_values": [2, 0, 1], "theta_values": [0.01, 0.005],
        "per_mode_dim": 16, "subspace_dim": 4,
    }))
    return path


def test_sweep_csv(capsys, tmp_path, sweep_config):
    out_path = tmp_path / "rows.csv"
    code, _, _ = run(capsys, "sweep", "--config", str(sweep_config), "--out", str(out_path))
    assert code == 0
    rows = list(csv.DictReader(out_path.open()))
    assert tuple(rows[0].keys()) == SWEEP_COLUMNS
    keys = [(int(r["n"]), float(r["theta"])) for r in rows]
    assert keys == sorted(keys) and len(keys) == 6
    r0 = next(r for r in rows if r["n"] == "0" and r["theta"] == "0.01")
    assert abs(float(r0["N_expect"]) - np.sinh(0.01) ** 2) < 1e-12
    assert abs(float(r0["N_formula_rhs"]) - float(r0["N_expect"])) < 1e-12


def test_sweep_deterministic_under_concurrency(capsys, sweep_config):
    _, serial, _ = run(capsys, "sweep", "--config", str(sweep_config))
    _, parallel, _ = run(capsys, "sweep", "--config", str(sweep_config), "--jobs", "4")
    assert serial == parallel


def test_sweep_flags_override_and_json(capsys, sweep_config):
    code, out, _ = run(capsys, "sweep", "--config", str(sweep_config), "--n-values", "-1,0",
                       "--theta-values", "0.3", "--trace", "partner", "--format", "json")
    assert code == 0
    rows = json.loads(out)
    assert [(r["n"], r["theta"]) for r in rows] == [(-1, 0.3), (0, 0.3)]
    assert abs(rows[1]["beta_fit"] - (-2 * np.log(np.tanh(0.3)))) < 1e-3


def test_sweep_errors(capsys, tmp_path):
    assert run(capsys, "sweep", "--config", str(tmp_path / "nope.json"))[0] == 4
    bad = tmp_path / "bad.json"
    bad.write_text('{"n_values": [0], "colour": 1}')
    assert run(capsys, "sweep", "--config", str(bad))[0] == 2
    bad.write_text("{not json")
    assert run(capsys, "sweep", "--config", str(bad))[0] == 2
    assert run(capsys, "sweep", "--n-values", "0", "--theta-values", "0.1",
               "--dim", "8", "--sub", "6")[0] == 2
    assert run(capsys, "sweep", "--n-values", "0", "--theta-values", "0.1", "--dim", "8",
               "--sub", "2", "--out", str(tmp_path / "no" / "x.csv"))[0] == 4
