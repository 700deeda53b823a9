import json

import numpy as np
import pytest

from dichain import cli, harness
from dichain.harness import ConfigError, config_from_dict, fit_loglog

P_NL = {
    "V1": {"k1": 1.0, "k2": 0.3, "k3": 0.1},
    "V2": {"k1": 2.0, "k2": 0.4, "k3": 0.0},
    "W1": {"k1": 1.0, "k2": 0.25, "k3": 0.05},
    "W2": {"k1": 1.0, "k2": 0.35, "k3": 0.0},
}
FAM = {"gamma": 2.0, "c": 1.0, "nl": {"v12": 0.3, "v22": 0.2, "w12": 0.4, "w22": 1.0}}
WAVES = [{"branch": "acoustic", "theta": 0.3}, {"branch": "optical", "theta": 0.6}]


def small_cfg(**over):
    doc = dict(kind="residual_scaling", params=P_NL, waves=WAVES,
               eps=[0.1, 0.0707, 0.05], tau0=0.5, L_y=25.6, n_grid=64)
    doc.update(over)
    return config_from_dict(doc)


def test_config_rejects_unknown_kind():
    with pytest.raises(ConfigError, match="kind"):
        config_from_dict({"kind": "nope"})


def test_config_rejects_unknown_key():
    with pytest.raises(ConfigError, match="bogus"):
        config_from_dict({"kind": "convergence", "bogus": 1})


def test_config_rejects_bad_eps():
    with pytest.raises(ConfigError, match="eps"):
        small_cfg(eps=[0.05, 0.1])
    with pytest.raises(ConfigError, match="eps"):
        small_cfg(eps=[0.3, 0.1])


def test_config_rejects_bad_params():
    with pytest.raises(ConfigError, match="params.W2"):
        config_from_dict({"kind": "convergence", "eps": [0.1, 0.05, 0.025],
                          "params": {"V1": {"k1": 1}, "V2": {"k1": 2}, "W1": {"k1": 1}}})


def test_config_rejects_bad_beta_tau0():
    with pytest.raises(ConfigError, match="beta"):
        small_cfg(beta=0.8)
    with pytest.raises(ConfigError, match="tau0"):
        small_cfg(tau0=-1.0)


def test_fit_loglog_and_floor():
    rows = [(0.1, 0.1 ** 2.5), (0.05, 0.05 ** 2.5), (0.025, 0.025 ** 2.5)]
    slope, resid = fit_loglog(rows)
    assert abs(slope - 2.5) < 1e-12 and resid < 1e-12
    # a floored point is excluded
    rows_floor = rows + [(0.0125, 5e-9)]
    slope2, _ = fit_loglog(rows_floor, noise_floor=1e-9)
    assert abs(slope2 - 2.5) < 1e-12
    with pytest.raises(ValueError):
        fit_loglog(rows[:2])


def test_scaling_report_regime_stability():
    rep = harness.run_residual_scaling(small_cfg(eps=[0.1, 0.0707, 0.05, 0.0354]))
    assert rep.passed
    slope_all, _ = fit_loglog(rep.rows)
    slope_trim, _ = fit_loglog(rep.rows[1:])
    assert abs(slope_all - slope_trim) <= 0.15


def test_setup_run_adjusts_eps_exactly():
    cfg = small_cfg()
    setup = harness.setup_run(cfg, 0.0707)
    assert abs(setup.spec.eps * setup.spec.N - cfg.L_y) < 1e-12
    assert setup.spec.N % 4 == 0


def test_single_wave_config():
    cfg = small_cfg(waves=[{"branch": "acoustic", "theta": 0.3}])
    setup = harness.setup_run(cfg, 0.1)
    b2 = setup.spec.solution.fields(0.0)[1]
    assert np.all(b2 == 0.0)


def test_determinism_identical_csv(tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (out1, out2):
        rep = harness.run_residual_scaling(small_cfg())
        cli.write_csv(str(out), "eps,error", rep.rows)
    assert out1.read_bytes() == out2.read_bytes()


def test_cli_dispersion(tmp_path):
    params = tmp_path / "p.json"
    params.write_text(json.dumps({"V1": {"k1": 1.0}, "V2": {"k1": 2.0},
                                  "W1": {"k1": 1.0}, "W2": {"k1": 1.0}}))
    out = tmp_path / "disp.csv"
    rc = cli.main(["dispersion", "--params", str(params), "--out", str(out)])
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "theta,omega_acoustic,omega_optical,vg_acoustic,vg_optical"
    assert len(lines) == 1025
    assert all(len(line.split(",")) == 5 for line in lines[1:])


def test_cli_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "convergence", "epz": [0.1]}')
    rc = cli.main(["validate", "--config", str(bad)])
    assert rc == 1
    assert "epz" in capsys.readouterr().err


def test_cli_invalid_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    rc = cli.main(["validate", "--config", str(bad)])
    assert rc == 1
    assert "invalid JSON" in capsys.readouterr().err


def test_cli_validate_pass(tmp_path, capsys):
    doc = dict(kind="ansatz_scaling", params=P_NL, waves=WAVES,
               eps=[0.1, 0.0707, 0.05], tau0=0.5, L_y=25.6, n_grid=64,
               out=str(tmp_path / "gap.csv"))
    cfgf = tmp_path / "cfg.json"
    cfgf.write_text(json.dumps(doc))
    rc = cli.main(["validate", "--config", str(cfgf)])
    out = capsys.readouterr().out
    assert rc == 0
    assert out.startswith("PASS")
    lines = (tmp_path / "gap.csv").read_text().strip().splitlines()
    assert lines[0] == "eps,error"
    assert len(lines) == 4


def test_cli_resonance_scan(tmp_path):
    out = tmp_path / "scan.csv"
    rc = cli.main(["resonance", "--gamma", "2.0", "--c", "0.2,1.0", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "gamma,c,b_over_a,theta_star,residual"
    assert len(lines) == 3
    assert "nan" in lines[1]  # c=0.2 has no positive ratio


def test_cli_amplitudes_and_simulate(tmp_path, capsys):
    doc = dict(kind="amplitudes", resonant_family=FAM, eps=[0.05], tau0=0.2,
               L_y=25.6, n_grid=32, a0=[1.0, 0.3], dtau=0.01, n_snapshots=3,
               out=str(tmp_path / "traj.csv"))
    f = tmp_path / "amp.json"
    f.write_text(json.dumps(doc))
    assert cli.main(["amplitudes", "--config", str(f)]) == 0
    lines = (tmp_path / "traj.csv").read_text().strip().splitlines()
    assert lines[0] == "tau,y,reA1_1,imA1_1,reA1_2,imA1_2"

    doc = dict(kind="simulate", params=P_NL, waves=[{"branch": "acoustic", "theta": 0.3}],
               eps=[0.1], tau0=0.05, L_y=12.8, n_grid=16, a0=[0.5],
               n_samples=2, out=str(tmp_path / "snap.csv"))
    f2 = tmp_path / "sim.json"
    f2.write_text(json.dumps(doc))
    assert cli.main(["simulate", "--config", str(f2)]) == 0
    lines = (tmp_path / "snap.csv").read_text().strip().splitlines()
    assert lines[0] == "t,j,u1,u2,v1,v2"
    N = 128 - 128 % 4
    assert len(lines) == 1 + 3 * N


def test_dichain_threads_env(monkeypatch):
    monkeypatch.setenv("DICHAIN_THREADS", "2")
    rep = harness.run_residual_scaling(small_cfg())
    assert rep.passed
