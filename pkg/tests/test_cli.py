import io

import pytest

from piezosupply.cli import main


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def s128_cfg(tmp_path):
    path = tmp_path / "s128.cfg"
    path.write_text("preset = S128-H5FR-1107YB\nmodel.tip_mass_g = 1.0\n")
    return path


def test_sweep_freq_writes_file(s128_cfg, tmp_path):
    out = tmp_path / "curve.csv"
    code, stdout, _ = run("sweep-freq", "--config", str(s128_cfg), "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# generated_by: piezosupply")
    assert lines[1] == "frequency_hz,voltage_v"
    assert len(lines) == 2 + 243
    freq = float(stdout.split("resonance:")[1].split("Hz")[0])
    assert abs(freq - 100.0) <= 2.0


def test_outputs_are_deterministic(s128_cfg, tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    assert run("sweep-freq", "--config", str(s128_cfg), "--out", str(a), "--format", "svg")[0] == 0
    assert run("sweep-freq", "--config", str(s128_cfg), "--out", str(b), "--format", "svg")[0] == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("command", ["sweep-load", "mass-study", "report"])
def test_other_commands(command, s128_cfg):
    code, stdout, err = run(command, "--config", str(s128_cfg))
    assert code == 0, err
    assert stdout


def test_transient_with_chain(tmp_path):
    cfg = tmp_path / "chain.cfg"
    cfg.write_text(
        "model.theta_n_per_v = 1e-3\nmodel.tip_mass_g = 1.0\n"
        "drive.accel_m_s2 = 39.24\ndrive.frequency_hz = 100\n"
        "load.resistance_ohm = 22000\n"
        "storage.input_cap_uf = 10\nstorage.output_cap_uf = 10\n"
        "sim.steps_per_period = 200\nsim.periods = 40\nsim.record_stride = 10\n")
    out = tmp_path / "trace.csv"
    code, stdout, err = run("transient", "--config", str(cfg), "--out", str(out))
    assert code == 0, err
    assert "energy audit" in stdout
    assert out.read_text().count("\n") > 100


def test_unknown_subcommand():
    code, _, err = run("frobnicate")
    assert code == 2
    assert err.count("\n") == 1


def test_missing_required_flag(tmp_path):
    assert run("fit", "--free", "m_eff")[0] == 2


def test_fit_resonance_pair(tmp_path):
    data = tmp_path / "resonances.csv"
    data.write_text("tip_mass_g,frequency_hz\n1.0,100\n1.5,90\n")
    code, stdout, err = run("fit", "--data", str(data), "--free", "m_eff,k_eff")
    assert code == 0, err
    assert "model.m_eff_g = 1.1315" in stdout
    assert "m_eff=1.13158 g" in stdout and "k_eff=841.51" in stdout


def test_fit_seeded_start(tmp_path):
    data = tmp_path / "resonances.csv"
    data.write_text("tip_mass_g,frequency_hz\n1.0,100\n1.5,90\n")
    code, stdout, _ = run("fit", "--data", str(data), "--free", "m_eff,k_eff", "--seed", "3")
    assert code == 0
    assert "k_eff=841.5" in stdout


def test_fit_bad_free_param_is_usage_error(tmp_path):
    data = tmp_path / "resonances.csv"
    data.write_text("tip_mass_g,frequency_hz\n1.0,100\n1.5,90\n")
    assert run("fit", "--data", str(data), "--free", "colour")[0] == 2


def test_data_errors_exit_3(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("freq,volt\n1,2\n")
    code, _, err = run("fit", "--data", str(bad), "--free", "m_eff")
    assert code == 3
    assert "header" in err
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("buck.output_setpoint_v = 3.0\n")
    code, _, err = run("report", "--config", str(cfg))
    assert code == 3 and "line 1" in err
    assert run("report", "--config", str(tmp_path / "missing.cfg"))[0] == 3


def test_non_convergence_exits_4(tmp_path):
    data = tmp_path / "resonances.csv"
    data.write_text("tip_mass_g,frequency_hz\n1.0,100\n1.5,90\n")
    cfg = tmp_path / "tight.cfg"
    cfg.write_text("fit.max_evaluations = 3\n")
    code, _, err = run("fit", "--config", str(cfg), "--data", str(data), "--free", "m_eff,k_eff")
    assert code == 4
    assert "converge" in err


def test_dt_too_large_exits_3(tmp_path):
    cfg = tmp_path / "coarse.cfg"
    cfg.write_text("load.resistance_ohm = 10000\ndrive.frequency_hz = 100\nsim.dt_s = 1e-3\n")
    assert run("transient", "--config", str(cfg))[0] == 3
