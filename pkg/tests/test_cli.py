import json

import numpy as np
import pytest
import yaml

from setobs.cli import main, run
from setobs.config import ConfigError, RunConfig, build_scenario
from setobs.outputs import trace_columns, write_report
from setobs.scenarios import UnknownScenarioError


def _write_cfg(path, **data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_header_layout():
    assert trace_columns(3, 2, 2) == [
        "t", "x_1", "x_2", "x_3", "y_1", "y_2", "y_v_1", "y_v_2",
        "zeta_m_1", "zeta_m_2", "zeta_m_3", "zeta_M_1", "zeta_M_2", "zeta_M_3",
        "xi_m_1", "xi_m_2", "xi_m_3", "xi_M_1", "xi_M_2", "xi_M_3",
        "theta_hat_m_1", "theta_hat_m_2", "theta_hat_M_1", "theta_hat_M_2",
        "theta_bar_inf_m_1", "theta_bar_inf_m_2", "theta_bar_inf_M_1", "theta_bar_inf_M_2",
        "pe_m", "pe_M", "branch", "s_1", "s_2", "d_1", "d_2", "z_1", "z_2", "S", "D", "Z"]


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "ex2"
    code = main(["run", "--scenario", "example2", "--horizon", "5", "--out", str(out),
                 "--plots", "--noise", "on", "--seed", "4"])
    assert code in (0, 2)
    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[0].split(",") == trace_columns(3, 2, 2)
    assert len(lines) == 1 + 5001
    assert len(lines[1].split(",")) == len(trace_columns(3, 2, 2))
    rep = json.loads((out / "report.json").read_text())
    assert rep["scenario"] == "example2" and rep["seed"] == 4
    for name in ("theta_intervals.png", "theta_bar_inf.png", "state_envelopes.png",
                 "indicators.png"):
        assert (out / name).stat().st_size > 0
    assert "scenario example2" in capsys.readouterr().out


def test_reruns_are_byte_identical(tmp_path):
    for k in (1, 2):
        main(["run", "--scenario", "example2", "--horizon", "3", "--noise", "on",
              "--out", str(tmp_path / f"r{k}")])
    a = (tmp_path / "r1" / "trace.csv").read_bytes()
    assert a == (tmp_path / "r2" / "trace.csv").read_bytes()


def test_zero_horizon_writes_header_only(tmp_path):
    assert main(["run", "--scenario", "example1", "--horizon", "0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "trace.csv").read_text().count("\n") == 1


def test_verify_exit_codes(tmp_path, capsys):
    assert main(["verify", "--scenario", "example1", "--json", str(tmp_path / "a2.json")]) == 0
    assert json.loads((tmp_path / "a2.json").read_text())["cooperative_lower"] is True
    assert main(["verify", "--scenario", "nope"]) == 1
    assert "unknown scenario" in capsys.readouterr().err
    bad = _write_cfg(tmp_path / "bad.yaml", scenario="tank2", params={"ell": -50.0})
    assert main(["verify", "--config", bad]) == 2


def test_failed_check_exits_2(tmp_path):
    code = main(["run", "--scenario", "tank1", "--horizon", "30", "--out", str(tmp_path)])
    assert code == 2
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["checks"]["theorem"] is False and rep["valid"] is False


def test_assumption_failure_exits_2_unless_forced(tmp_path):
    cfg = _write_cfg(tmp_path / "c.yaml", scenario="tank2", horizon=1, params={"ell": -50.0},
                     out=str(tmp_path / "o"))
    assert main(["run", "--config", cfg]) == 2
    assert not (tmp_path / "o" / "trace.csv").exists()


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"scenario": "example1", "colour": "red"})
    with pytest.raises(UnknownScenarioError):
        RunConfig(scenario="example7")
    with pytest.raises(ConfigError):
        RunConfig(checks=("theorem", "magic"))
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"noise": "loud"})
    with pytest.raises(ConfigError):
        build_scenario(RunConfig(scenario="example1", horizon=1.0005))
    with pytest.raises(ConfigError):
        build_scenario(RunConfig(scenario="example1", overrides={"Gamma_lower": [[-1, 0], [0, 1]]}))
    with pytest.raises(ConfigError):
        build_scenario(RunConfig(scenario="example1", params={"Sc": 1.0}))
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "list.yaml")
    bad = _write_cfg(tmp_path / "x.yaml", scenario="example1", bogus=1)
    assert main(["run", "--config", bad]) == 1


def test_config_overrides_apply():
    cfg = RunConfig.from_dict({"scenario": "example2", "horizon": 12, "noise": "on",
                               "gamma": [10, 20], "overrides": {"transient": 3}})
    sc = build_scenario(cfg)
    assert sc.horizon == 12.0 and sc.transient == 3
    np.testing.assert_array_equal(sc.noise_amplitude, [0.5, 0.5])
    np.testing.assert_array_equal(np.diag(sc.gains.Gamma_lower), [10, 20])
    sc = build_scenario(cfg.merged(noise_amplitude=0.1))
    np.testing.assert_array_equal(sc.noise_amplitude, [0.1, 0.1])
    sc = build_scenario(RunConfig(scenario="tank1", params={"ell": 2.5}))
    assert sc.gains.L_lower[0, 0] == 2.5
    with pytest.raises(ConfigError):
        build_scenario(RunConfig(scenario="crusher", noise=True))


def test_run_api_without_writing():
    report, res = run(RunConfig(scenario="crusher", horizon=2.0), write=False)
    assert report.scenario == "crusher" and len(res.t) == 2001
    assert set(report.checks) == {"assumption2", "theorem", "pe"}


def test_batch(tmp_path, capsys):
    cfgs = tmp_path / "cfgs"
    cfgs.mkdir()
    _write_cfg(cfgs / "a.yaml", scenario="example2", horizon=2)
    _write_cfg(cfgs / "b.yaml", scenario="example1", horizon=2, colour="red")
    code = main(["batch", "--configs", str(cfgs), "--out", str(tmp_path / "runs"), "--jobs", "2"])
    assert code == 1
    out = capsys.readouterr().out
    assert "a.yaml" in out and "error" in out
    assert (tmp_path / "runs" / "a" / "trace.csv").exists()
    assert main(["batch", "--configs", str(tmp_path / "empty")]) == 1


def test_report_nan_becomes_null(tmp_path):
    write_report({"x": float("nan"), "y": np.array([1.0, np.inf])}, tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text()) == {"x": None, "y": [1.0, None]}
