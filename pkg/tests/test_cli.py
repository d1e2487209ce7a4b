import json
import os
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from qensemble.cli import main
from qensemble.families import build_lattice, little_q_jacobi
from qensemble.qcore import QContext

SCHEMA = json.loads((Path(__file__).resolve().parents[1] / "schema" / "output.json").read_text())
LQJ = ["--family", "little-q-jacobi", "--alpha", "0.5", "--beta", "1.5", "--q", "0.3"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    payload = json.loads(out)
    jsonschema.validate(payload, SCHEMA)
    return code, payload


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for name in ("QENSEMBLE_TRUNC_DEPTH", "QENSEMBLE_TAIL_TOL", "QENSEMBLE_CMP_TOL"):
        monkeypatch.delenv(name, raising=False)


def test_partition_routes_agree_with_oracle(capsys):
    code, p = run_json(capsys, "partition", *LQJ, "--n", "2", "--oracle")
    assert code == 0 and p["status"] == "ok"
    vals = p["result"]["values"]
    assert set(vals) == {"closed", "product_u", "oracle"}
    assert max(p["result"]["relative_errors"].values()) < 1e-8
    assert p["header"]["config"]["q"] == 0.3
    assert p["header"]["family"]["params"] == {"alpha": 0.5, "beta": 1.5}


def test_odd_partition_uses_beta_route(capsys):
    code, p = run_json(capsys, "partition", *LQJ, "--n", "3")
    assert code == 0
    assert set(p["result"]["values"]) == {"beta_route", "bordered_pfaffian"}


def test_grid_beyond_lattice_is_rejected(capsys):
    code, _ = run(capsys, "tabulate", *LQJ, "--grid", "0:5000")
    assert code == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["partition", "--family", "little-q-jacobi", "--alpha", "-2", "--beta", "0", "--q", "0.3", "--n", "2"],
        ["partition", "--family", "little-q-jacobi", "--alpha", "0.5", "--q", "0.3", "--n", "2"],
        ["partition", *LQJ[:-1], "1.5", "--n", "2"],
        ["partition", *LQJ, "--n", "-1"],
        ["nosuchcommand"],
        ["kernel", *LQJ, "--n", "2", "--grid", "abc"],
    ],
)
def test_bad_input_exits_with_spec_error(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        raise SystemExit(main(argv))
    assert exc.value.code == 1


def test_sop_table(capsys):
    code, p = run_json(capsys, "sop", "--family", "q-laguerre", "--alpha", "0.5", "--q", "0.6", "--n", "3")
    assert code == 0
    assert len(p["rows"]) == 6
    assert p["rows"][0]["closed"] == [1.0]
    assert p["result"]["max_discrepancy"] < 1e-8
    assert len(p["result"]["u"]) == 3


def test_sop_limit_check(capsys):
    code, p = run_json(capsys, "sop", "--family", "q-laguerre", "--alpha", "0.5", "--q", "0.5", "--n", "1",
                       "--limit-check")
    assert code == 0
    lim = p["result"]["limit_check"]
    assert lim["passed"] and lim["relative_error"] < 0.02


def test_kernel_grid_rows(capsys):
    code, p = run_json(capsys, "kernel", *LQJ, "--n", "2", "--grid", "0:2")
    assert code == 0
    assert len(p["rows"]) == 9
    for row in p["rows"]:
        if row["x"] == row["y"]:
            assert row["K"] == 0.0


def test_correlation_matches_oracle(capsys):
    code, p = run_json(capsys, "correlation", *LQJ, "--n", "3", "--k", "2", "--grid", "1:3", "--oracle")
    assert code == 0 and p["status"] == "ok"
    assert len(p["rows"]) == 3
    for row in p["rows"]:
        assert row["rho"] == pytest.approx(row["oracle"], rel=1e-8, abs=1e-12)


def test_correlation_empty_grid(capsys):
    code, p = run_json(capsys, "correlation", *LQJ, "--n", "2", "--k", "2", "--grid", "1:1")
    assert code == 0
    assert p["rows"] == []


def test_one_point_tabulation_sums_to_particle_number(capsys):
    kmax = int(build_lattice(little_q_jacobi(0.5, 1.5), QContext(0.3)).k.max())
    code, p = run_json(capsys, "tabulate", *LQJ, "--n", "2", f"--grid=0:{kmax}")
    assert code == 0
    total = sum(row["weight"] * row["density"] for row in p["rows"])
    assert total == pytest.approx(2.0, rel=1e-8)


def test_verify_runs_only_requested_suite(capsys):
    code, p = run_json(capsys, "verify", "--suite", "pfaffian")
    assert code == 0 and p["status"] == "ok"
    assert {row["suite"] for row in p["rows"]} == {"pfaffian"}
    assert all(row["passed"] for row in p["rows"])


def test_loose_tail_tolerance_fails_verification(capsys):
    code, p = run_json(capsys, "verify", "--suite", "partition", "--tail-tol", "1e-4")
    assert code == 2
    assert p["status"] != "ok"
    assert any(not row["passed"] for row in p["rows"])


def test_env_override_is_echoed(capsys, monkeypatch):
    monkeypatch.setenv("QENSEMBLE_TRUNC_DEPTH", "512")
    code, p = run_json(capsys, "partition", *LQJ, "--n", "2")
    assert code == 0
    assert p["header"]["env_overrides"] == {"trunc_depth": 512}
    assert p["header"]["config"]["trunc_depth"] == 512


def test_csv_and_pretty_formats(capsys):
    code, out = run(capsys, "partition", *LQJ, "--n", "3", "--format", "csv")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "route,value" and len(lines) == 3
    code, out = run(capsys, "partition", *LQJ, "--n", "3", "--format", "pretty")
    assert code == 0 and out.startswith("#") and "beta_route" in out


def test_output_is_bit_stable(capsys):
    argv = ["correlation", *LQJ, "--n", "3", "--k", "1", "--grid", "0:5"]
    _, first = run(capsys, *argv)
    _, second = run(capsys, *argv)
    assert first == second


def test_module_entry_point():
    env = dict(os.environ)
    env.pop("QENSEMBLE_TRUNC_DEPTH", None)
    res = subprocess.run([sys.executable, "-m", "qensemble", "partition", *LQJ, "--n", "2"],
                         capture_output=True, text=True, env=env, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["status"] == "ok"
