import json
import math
import subprocess
import sys

import pytest

from toadwave import cli
from toadwave.spectral import EigenSolverError


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_defaults_merge():
    cfg = cli.RunConfig.from_dict({"slab": {"epsilon": 0.02}})
    assert cfg.slab["epsilon"] == 0.02 and cfg.slab["a_list"] == [20.0, 40.0, 80.0]
    assert cfg.spectral["n_theta"] == 400
    assert cfg.with_tau(0.5).slab["tau"] == 0.5 == cfg.with_tau(0.5).spectral["tau"]


@pytest.mark.parametrize("raw, needle", [
    ({"bogus": 1}, "unknown configuration key 'bogus'"),
    ({"params": {"nope": 1}}, "params.nope"),
    ({"params": {"theta_max": 0.5}}, "theta_min must be < params.theta_max"),
    ({"params": {"alpha": -1}}, "params.alpha"),
    ({"slab": {"epsilon": 0.5}}, "slab.epsilon"),
    ({"spectral": {"tau": 2}}, "spectral.tau"),
    ({"evolution": {"thresholds": [0.5, 2]}}, "evolution.thresholds"),
])
def test_invalid_config_exits_1(tmp_path, capsys, raw, needle):
    assert cli.main(["spectral", "--config", write(tmp_path, raw), "--out", str(tmp_path)]) == 1
    assert needle in capsys.readouterr().err


def test_unreadable_config_exits_1(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["spectral", "--config", str(p)]) == 1


def test_spectral_outputs(tmp_path):
    cfg = write(tmp_path, {"spectral": {"n_theta": 51}})
    assert cli.main(["spectral", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    doc = json.loads((tmp_path / "o" / "minspeed.json").read_text())
    assert doc["schema_version"] == cli.SCHEMA_VERSION
    assert doc["config"]["spectral"]["n_theta"] == 51
    assert 2.45 < doc["c_star"] < 2.46
    raw = (tmp_path / "o" / "dispersion.csv").read_bytes()
    assert b"\r" not in raw and raw.startswith(b"lambda,gamma,c\n")
    assert len(raw.splitlines()) == 65


def test_tau_flag_gives_kpp_speed(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["spectral", "--tau", "0", "--out", str(out)]) == 0
    doc = json.loads((out / "minspeed.json").read_text())
    assert doc["c_star"] == pytest.approx(2.0, rel=1e-8)


def test_slab_outputs(tmp_path):
    cfg = write(tmp_path, {"slab": {"a_list": [10, 15], "n_theta": 7}, "spectral": {"n_theta": 7}})
    out = tmp_path / "o"
    assert cli.main(["slab", "--config", cfg, "--out", str(out)]) == 0
    conv = json.loads((out / "convergence.json").read_text())
    assert conv["gaps_decreasing"] and len(conv["pairs"]) == 2
    assert (out / "slab_a10_mu.csv").read_text().startswith("xi,theta,mu\n")
    assert (out / "slab_a15_nu.csv").exists()


def test_evolve_without_growth_skips_spectral(tmp_path):
    cfg = write(tmp_path, {"params": {"r": 0}, "evolution": {"t_end": 4, "x_max": 20, "n_theta": 5}})
    out = tmp_path / "o"
    assert cli.main(["evolve", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "summary.json").read_text())
    assert doc["c_star"] is None
    assert doc["mass_balance_per_time"] < 1e-12
    assert (out / "front.csv").read_text().startswith("t,threshold,position\n")


def test_window_too_small_exits_2(tmp_path):
    cfg = write(tmp_path, {"evolution": {"x_max": 30, "n_theta": 5, "t_end": 20},
                           "spectral": {"n_theta": 21}})
    assert cli.main(["evolve", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_bracket_failure_exits_2(tmp_path):
    cfg = write(tmp_path, {"spectral": {"lambda_lo": 3.0, "lambda_hi": 9.0, "n_theta": 21}})
    assert cli.main(["spectral", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_solver_failure_exits_3(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise EigenSolverError("inverse iteration did not converge", 1.0)
    monkeypatch.setattr(cli.spectral, "minimize_speed", broken)
    assert cli.main(["spectral", "--out", str(tmp_path)]) == 3


def test_verify_spectral_suite(tmp_path):
    assert cli.main(["verify", "--only", "spectral", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "verify.json").read_text())
    names = [c["name"] for c in doc["checks"]]
    assert "rel1" in names and "appendixB" not in names
    assert all(c["passed"] for c in doc["checks"])


def test_verify_reports_injected_fault(tmp_path, monkeypatch, capsys):
    suite, anchor, _ = cli.CHECKS["rel1"]
    monkeypatch.setitem(cli.CHECKS, "rel1", (suite, anchor, lambda ctx: (False, {"R1": math.inf})))
    assert cli.main(["verify", "--only", "rel1", "--out", str(tmp_path)]) == 4
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert doc["failed"] == ["rel1"] and doc["checks"][0]["values"]["R1"] is None
    assert "rel1" in capsys.readouterr().err


def test_verify_crashing_check_fails(tmp_path, monkeypatch):
    def boom(ctx):
        raise RuntimeError("boom")
    monkeypatch.setitem(cli.CHECKS, "rel2", ("spectral", "x", boom))
    assert cli.main(["verify", "--only", "rel2", "--out", str(tmp_path)]) == 4


def test_verify_unknown_suite_exits_1(tmp_path):
    assert cli.main(["verify", "--only", "nonsense", "--out", str(tmp_path)]) == 1


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "toadwave", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "verify" in out.stdout
