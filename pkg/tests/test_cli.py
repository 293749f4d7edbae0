import json
import subprocess
import sys

import pytest

from bnreduce.cli import POHOZAEV_HEADER, main
from bnreduce.storage import read_manifest, read_table

MINI = """\
problem: {N: 5, q: 3.0}
sweep: {M_min: 1000, M_max: 10000, count: 6}
crit: {n: 2, starts: 5}
output_dir: out
"""


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    """Mini configuration run through every subcommand once."""
    d = tmp_path_factory.mktemp("cli")
    (d / "c.yaml").write_text(MINI)
    codes = {}
    for cmd in ("robin", "green", "phi", "crit", "sweep", "verify", "pohozaev", "report"):
        codes[cmd] = main([cmd, "--config", str(d / "c.yaml"), "--out", str(d / "out")])
    return d, codes


def test_all_commands_succeed(run_dir):
    d, codes = run_dir
    assert codes == {c: 0 for c in codes}
    for name in ("robin.csv", "green.csv", "phi.json", "crit.json", "index.json",
                 "verify.json", "pohozaev.csv", "report.txt"):
        assert (d / "out" / name).exists()
    assert len(list((d / "out" / "profiles").glob("profile_*.csv"))) == 6


def test_manifest_is_append_only_and_versioned(run_dir):
    d, _ = run_dir
    entries = read_manifest(d / "out")
    assert [e["command"] for e in entries] == ["robin", "green", "phi", "crit", "sweep",
                                               "verify", "pohozaev", "report"]
    assert all(e["schema"] == 1 and e["tool_version"] for e in entries)
    rate = [c for c in entries[5]["checks"] if c["name"] == "rate_exponent"][0]
    assert abs(rate["value"] + 2.5) <= 0.05 and rate["passed"]
    before = (d / "out" / "manifest.jsonl").read_text()
    main(["report", "--config", str(d / "c.yaml"), "--out", str(d / "out")])
    after = (d / "out" / "manifest.jsonl").read_text()
    assert after.startswith(before) and after.count("\n") == before.count("\n") + 1


def test_command_outputs(run_dir):
    d, _ = run_dir
    out = d / "out"
    header, rows = read_table(out / "robin.csv")
    assert header == ["d", "t", "robin", "grad_norm", "boundary_ratio"]
    assert abs(float(rows[-1][4]) - 1) < 0.1
    crit = json.loads((out / "crit.json").read_text())
    assert crit["critical_points"] == [] and crit["n"] == 2
    header, rows = read_table(out / "pohozaev.csv")
    assert header == POHOZAEV_HEADER == ["index", "M", "eps", "rho", "lhs", "rhs",
                                         "relative_residual"]
    assert len(rows) == 6 * 3
    assert max(float(r[-1]) for r in rows) < 1e-6


def test_verify_is_deterministic(run_dir):
    d, _ = run_dir
    first = (d / "out" / "verify.json").read_bytes()
    assert main(["verify", "--config", str(d / "c.yaml"), "--out", str(d / "out")]) == 0
    assert (d / "out" / "verify.json").read_bytes() == first


def test_single_peak_crit(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("crit: {n: 1, starts: 3}\n")
    assert main(["crit", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    crit = json.loads((tmp_path / "crit.json").read_text())
    assert len(crit["critical_points"]) == 1


def test_default_sweep_verify_outcome(tmp_path):
    out = str(tmp_path)
    assert main(["sweep", "--out", out, "--threads", "4"]) == 0
    assert main(["verify", "--out", out]) == 2
    failed = [c["name"] for c in read_manifest(tmp_path)[-1]["checks"] if not c["passed"]]
    # the projection fit sits 8% from the bubble height at M = 100
    assert failed == ["projection_lambda"]
    assert main(["verify", "--out", out, "--tol", "projection_min_M=1000"]) == 0


def test_config_errors_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("problem:\n  N: 5\n  colour: red\n")
    assert main(["robin", "--config", str(bad), "--out", str(tmp_path)]) == 3
    err = capsys.readouterr().err
    assert "problem.colour" in err and "line 3" in err
    assert main(["robin", "--config", str(tmp_path / "missing.yaml")]) == 3
    assert main(["verify", "--out", str(tmp_path), "--data", str(tmp_path / "none")]) == 3
    assert main(["robin", "--out", str(tmp_path), "--tol", "bogus=1"]) == 3


def test_clamped_eps_exits_4(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("sweep: {M_min: 100, M_max: 1000, count: 3, clamp_eps_zero: true}\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 4
    assert "star-shaped" in capsys.readouterr().err
    last = read_manifest(tmp_path)[-1]
    assert last["passed"] is False and any("NoSolution" in n for n in last["notes"])


def test_environment_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("BNR_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["green"]) == 0
    assert (tmp_path / "env" / "green.csv").exists()
    assert main(["green", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "green.csv").exists()


def test_generic_domain_robin(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("problem: {N: 3, q: 5.0}\ndomain: {kind: generic, points: 1600}\n"
                   "robin: {d_min: 0.3, count: 4}\n")
    # d stops at 0.3, far from the boundary limit, so the ratio check fails
    assert main(["robin", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    checks = {c["name"]: c for c in read_manifest(tmp_path)[-1]["checks"]}
    assert checks["provider_boundary_residual"]["passed"]
    assert not checks["robin_boundary_ratio"]["passed"]
    # on the unit ball the ratio is exactly 1 / (1 - d/2) when N = 3
    _, rows = read_table(tmp_path / "robin.csv")
    for row in rows[1:]:
        d, ratio = float(row[0]), float(row[4])
        assert ratio == pytest.approx(1 / (1 - d / 2), rel=1e-5)


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "bnreduce", "green", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert "PASS green_bounds" in r.stdout
