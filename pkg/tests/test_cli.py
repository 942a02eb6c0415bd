import csv
import json

import pytest

from ymhlab.cli import main


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = main(list(args) + ["--output", str(out)])
    return code, out, json.loads((out / "summary.json").read_text())


def test_flow_pair_minimum(tmp_path):
    code, out, summary = run(tmp_path, "a", "flow-pair", "--set", "init.kind=minimum",
                             "--set", "flow.c=0.5", "--set", "grid.nx=8", "--set", "grid.ny=8")
    assert code == 0
    assert summary["status"] == "ok"
    assert summary["results"]["status"] == "converged" and summary["results"]["t_final"] == 0.0
    assert summary["config"]["flow.c"] == 0.5
    rows = list(csv.reader(open(out / "monitors.csv")))
    assert rows[0][0] == "t" and len(rows) == 2


def test_flow_metric_snapshots_and_determinism(tmp_path):
    args = ["flow-metric", "--set", "grid.nx=8", "--set", "grid.ny=8", "--set", "grid.d=1",
            "--set", "grid.a=0.5", "--set", "flow.dt=0.01", "--set", "flow.t_end=0.2",
            "--set", "flow.snapshot_every=10", "--set", "flow.monitors_every=5"]
    code1, out1, s1 = run(tmp_path, "m1", *args)
    code2, out2, s2 = run(tmp_path, "m2", *args)
    assert code1 == code2 == 0
    assert (out1 / "monitors.csv").read_bytes() == (out2 / "monitors.csv").read_bytes()
    s1["config"].pop("run.output_dir")
    s2["config"].pop("run.output_dir")
    assert s1 == s2
    assert len(s1["results"]["snapshots"]) == 3
    assert (out1 / s1["results"]["snapshots"][-1]).read_text().startswith("YMHSNAP v1 8 8")


def test_unknown_key_exits_1(tmp_path):
    code, _, summary = run(tmp_path, "bad", "flow-pair", "--set", "grid.nz=3")
    assert code == 1 and summary["reason"] == "config-error"


def test_invalid_init_exits_1(tmp_path):
    code, _, summary = run(tmp_path, "bad2", "flow-pair", "--set", "grid.d=1",
                           "--set", "init.kind=minimum")
    assert code == 1 and summary["status"] == "invalid"


def test_numerical_failure_exits_2(tmp_path):
    code, _, summary = run(tmp_path, "cfl", "flow-pair", "--set", "grid.nx=8", "--set", "grid.ny=8",
                           "--set", "grid.a=1", "--set", "init.kind=random",
                           "--set", "init.amplitude=2", "--set", "flow.dt=0.5",
                           "--set", "flow.cfl_kappa=1", "--set", "flow.t_end=5")
    assert code == 2 and summary["reason"] in ("cfl-violation", "blowup")


def test_check_identities(tmp_path):
    code, out, summary = run(tmp_path, "id", "check-identities", "--set", "check.sizes=8,16,32,64",
                             "--set", "grid.d=1")
    assert code == 0 and summary["results"]["all_passed"]
    rows = list(csv.reader(open(out / "identities.csv")))
    assert rows[0][:2] == ["identity", "variant"] and len(rows) == 15 and len(rows[0]) == 2 + 4 + 3


def test_gradcheck(tmp_path):
    code, _, summary = run(tmp_path, "g", "gradcheck", "--set", "grid.nx=8", "--set", "grid.ny=8",
                           "--set", "check.samples=2", "--set", "fiber.model=sphere")
    assert code == 0 and summary["results"]["worst_u"] < 1e-6 and summary["results"]["worst_A"] < 1e-6


def test_stability_scan_rows(tmp_path):
    code, out, summary = run(tmp_path, "s", "stability-scan", "--set", "grid.nx=8",
                             "--set", "grid.ny=8", "--set", "grid.a=0.5", "--set", "grid.d=1",
                             "--set", "flow.dt=0.01", "--set", "flow.t_end=1",
                             "--set", "scan.c_values=0.2,0.5,1.0")
    assert code == 0
    rows = list(csv.reader(open(out / "scan.csv")))
    assert len(rows) == 4
    assert [r[2] for r in rows[1:]] == ["Unstable", "Stable", "Stable"]


def test_sigma_check(tmp_path):
    code, out, summary = run(tmp_path, "sig", "sigma-check", "--set", "grid.nx=8",
                             "--set", "grid.ny=8", "--set", "grid.a=0.5", "--set", "grid.d=1",
                             "--set", "flow.dt=0.01", "--set", "flow.t_end=1")
    assert code == 0
    assert summary["results"]["max_increase"] <= 0
    assert summary["results"]["random_pairs"]["scalar_self_max"] == 0.0


def test_reconstruct_check(tmp_path):
    code, _, summary = run(tmp_path, "rc", "reconstruct-check", "--set", "grid.nx=8",
                           "--set", "grid.ny=8", "--set", "init.kind=constant",
                           "--set", "init.amplitude=3", "--set", "flow.dt=0.01",
                           "--set", "flow.t_end=0.2", "--set", "flow.scheme=rk4")
    assert code == 0 and summary["results"]["mismatch"] < 1e-4


def test_psi_check(tmp_path):
    code, _, summary = run(tmp_path, "psi", "psi-check", "--set", "grid.nx=8", "--set", "grid.ny=8",
                           "--set", "grid.a=0.5", "--set", "grid.d=1", "--set", "flow.dt=0.001",
                           "--set", "flow.scheme=rk4", "--set", "flow.t_end=1",
                           "--set", "psi.t_end_unstable=1")
    assert code == 0
    r = summary["results"]
    assert r["psi_max"] <= 0 and r["fd_mismatch_max"] < 1e-3
    assert "probe" in r


def test_bad_subcommand():
    with pytest.raises(SystemExit):
        main(["fly"])
