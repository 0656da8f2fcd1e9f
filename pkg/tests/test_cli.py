import csv
import json

import pytest

from mfginv import heatlib
from mfginv.cli import main, resolve_config, run, verify
from mfginv.errors import ConfigError


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _report(out):
    return json.loads((out / "report.json").read_text())


def test_schema_rejects_unknown_keys(tmp_path, capsys):
    path = _write(tmp_path, {"grid": {"N": 16, "extra": 1}})
    assert main(["forward", "--config", path, "--out", str(tmp_path / "o")]) == 2
    err = json.loads(capsys.readouterr().out)
    assert err["error"] == "ConfigError" and err["exit_code"] == 2


@pytest.mark.parametrize("cfg", [{"task": "bogus"}, {"solver": {"relaxation": 2}}, {"grid": {"N": "16"}}])
def test_resolve_config_validation(cfg):
    with pytest.raises(ConfigError):
        resolve_config(cfg)


def test_task_mismatch_rejected():
    with pytest.raises(ConfigError):
        resolve_config({"task": "verify"}, task="forward")


def test_defaults_and_overrides_are_echoed(tmp_path):
    cfg = resolve_config({"grid": {"N": 16, "Nt": 50}}, task="forward", seed=7, threads=2, out=tmp_path)
    assert cfg["costs"]["seed"] == 7 and cfg["threads"] == 2
    assert cfg["grid"]["T"] == 0.1
    code, report = run(cfg)
    assert code == 0
    assert _report(tmp_path)["config"]["costs"]["seed"] == 7


def test_zero_cost_forward_run(tmp_path):
    cfg = {"grid": {"N": 32, "Nt": 200}, "costs": {"zero": True},
           "initial": {"constants": [0.01, 0.02], "modes": [{"population": 1, "xi": [2], "amplitude": 0.01}]}}
    out = tmp_path / "o"
    assert main(["run", _write(tmp_path, {**cfg, "task": "forward"}), "--out", str(out)]) == 0
    checks = {c["check"]: c for c in _report(out)["checks"]}
    assert checks["zero_cost_value_vanishes"]["passed"]
    assert checks["zero_cost_density_is_heat_flow"]["passed"]
    assert (out / "tables" / "mass.csv").exists()
    assert (out / "fields" / "u0_initial.fld").exists()


def test_reports_are_deterministic(tmp_path):
    cfg = {"grid": {"N": 16, "T": 0.02, "Nt": 200}, "costs": {"band": 1}, "reconstruct": {"band": 1}}
    path = _write(tmp_path, cfg)
    reports = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["reconstruct-full", "--config", path, "--out", str(out), "--seed", "3"]) == 0
        rep = _report(out)
        rep.pop("timestamp")
        rep["config"]["output"].pop("dir")
        reports.append(json.dumps(rep, sort_keys=True))
        assert "wall_time" not in reports[-1]
    assert reports[0] == reports[1]
    a = (tmp_path / "a" / "tables" / "coefficients.csv").read_bytes()
    assert a == (tmp_path / "b" / "tables" / "coefficients.csv").read_bytes()


def test_solver_failure_exit_code(tmp_path):
    cfg = {"grid": {"N": 16, "Nt": 100}, "solver": {"max_iters": 1, "tol": 1e-14},
           "initial": {"constants": [0.01, 0.02]}}
    out = tmp_path / "o"
    assert main(["forward", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 3
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "SolverError" and len(err["history"]) == 1


def test_conditioning_failure_exit_code(tmp_path):
    cfg = {"grid": {"N": 32, "T": 0.1, "Nt": 200}, "costs": {"band": 1}, "reconstruct": {"band": 4}}
    out = tmp_path / "o"
    assert main(["reconstruct-full", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 4
    err = _report(out)["error"]
    assert err["error"] == "ConditioningError"
    assert err["condition"] > 1e8 and "frequency" in err


def test_probe_task_writes_ladder(tmp_path):
    cfg = {"grid": {"N": 16, "Nt": 200},
           "probe": {"directions": [{"population": 0, "xi": [1], "offset": 1.0}, {"population": 1, "xi": [-1]}]}}
    out = tmp_path / "o"
    assert main(["probe", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "tables" / "ladder.csv")))
    assert len(rows) == 3 and float(rows[-1]["error_vs_cascade"]) < 1e-6


def test_shared_and_stateless_tasks(tmp_path):
    shared = {"grid": {"N": 16, "T": 0.02, "Nt": 200}, "costs": {"kind": "shared", "band": 1},
              "reconstruct": {"band": 1, "population": 1, "rule": "mirrored"}}
    assert main(["reconstruct-shared", "--config", _write(tmp_path, shared, "s.json"),
                 "--out", str(tmp_path / "s")]) == 0
    stateless = {"grid": {"N": 8, "Nt": 200}, "costs": {"kind": "state-independent", "n": 3, "S": 3,
                                                        "coupling_min": 0.5}}
    out = tmp_path / "t"
    assert main(["reconstruct-stateless", "--config", _write(tmp_path, stateless, "t.json"), "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "tables" / "errors_by_coefficient.csv")))
    assert max(float(r["max_rel_err"]) for r in rows) <= 1e-4


def test_verify_passes_on_defaults():
    rows = verify(resolve_config({"task": "verify", "verify": {"cases": 10}}))
    failed = [r["check"] for r in rows if not r["passed"]]
    assert not failed
    names = {r["check"] for r in rows}
    assert {"duality_residual", "I2_negative_sweep", "decomposition_determinant_sweep", "mass_conservation"} <= names


def test_verify_catches_sign_flip_in_h2():
    flipped = lambda b, T, t: -heatlib.H2(b, T, t)
    rows = {r["check"]: r for r in verify(resolve_config({"task": "verify", "verify": {"cases": 2}}), H2=flipped)}
    assert not rows["I2_negative_sweep"]["passed"]
    assert not rows["I2_pin"]["passed"]


def test_verify_coarse_time_grid_fails_quadrature(tmp_path):
    cfg = {"task": "verify", "grid": {"N": 32, "Nt": 10}, "verify": {"cases": 2}}
    out = tmp_path / "o"
    assert main(["verify", "--config", _write(tmp_path, cfg), "--out", str(out)]) == 1
    rows = {r["check"]: r for r in _report(out)["checks"]}
    for name in ("time_weight_quadrature", "I2_discrete_quadrature"):
        assert not rows[name]["passed"] and rows[name]["measured"] > rows[name]["threshold"]
