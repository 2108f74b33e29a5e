import json
import subprocess
import sys

import numpy as np
import pytest

import oracles
from compobs import cli


def run(*args, env=None):
    return cli.main(list(args))


def test_rip_bound_prints_value(capsys):
    assert run("rip-bound", "--regime", "unitary", "--N", "100", "--S", "9", "--delta", "0.4", "--nu", "0.1") == 0
    out = capsys.readouterr().out
    line = [l for l in out.splitlines() if l.startswith("MK_min=")][0]
    assert float(line.split("=")[1]) == pytest.approx(oracles.rip_unitary(100, 9, 0.4, 0.1), rel=1e-12)
    assert "N=100" in out and "delta=0.4" in out


def test_rip_bound_bad_parameters(capsys):
    assert run("rip-bound", "--regime", "scaled-unitary", "--N", "10", "--S", "2", "--delta", "0.4", "--nu", "0.1") == 2
    assert capsys.readouterr().err.startswith("compobs: error:")


def test_missing_config(capsys, tmp_path):
    assert run("phase", "--config", str(tmp_path / "nope.json")) == 2
    assert "config not found" in capsys.readouterr().err


def test_bad_override_and_wrong_experiment(capsys, tmp_path):
    assert run("phase", "--out", str(tmp_path), "no_such_key=3") == 2
    assert run("phase", "--config", "fig6a", "--out", str(tmp_path)) == 2
    assert run("phase", "--out", str(tmp_path), "trials=0") == 2
    err = capsys.readouterr().err
    assert err.count("compobs: error:") == 3


def test_invalid_json_config(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run("phase", "--config", str(p)) == 2


def test_phase_csv_schema(tmp_path):
    assert run("phase", "--config", "fig3a", "--out", str(tmp_path), "trials=2", "M_list=[10,40]", "--threads", "1") == 0
    lines = (tmp_path / "phase_dense_k0.csv").read_text().splitlines()
    assert lines[0] == "# compobs-csv v1"
    assert lines[1] == "M,rate,trials,seed"
    assert len(lines) == 4
    assert (tmp_path / "phase_line_k0.csv").exists()


def test_seed_env_and_override(tmp_path, monkeypatch):
    monkeypatch.setenv("COMPOBS_SEED", "77")
    assert run("phase", "--out", str(tmp_path / "a"), "trials=1", "M_list=[10]") == 0
    assert (tmp_path / "a" / "phase_dense_k0.csv").read_text().splitlines()[2].endswith(",77")
    assert run("phase", "--out", str(tmp_path / "b"), "trials=1", "M_list=[10]", "master_seed=5") == 0
    assert (tmp_path / "b" / "phase_dense_k0.csv").read_text().splitlines()[2].endswith(",5")


def test_recover_roundtrip_and_infeasible(tmp_path, capsys):
    rng = np.random.default_rng(0)
    Phi = rng.standard_normal((8, 16))
    x0 = np.zeros(16)
    x0[[2, 9]] = [1.5, -0.5]
    np.savetxt(tmp_path / "phi.csv", Phi, delimiter=",")
    np.savetxt(tmp_path / "y.csv", Phi @ x0, delimiter=",")
    assert run("recover", "--matrix", str(tmp_path / "phi.csv"), "--measurements", str(tmp_path / "y.csv"),
               "--out", str(tmp_path)) == 0
    got = np.loadtxt(tmp_path / "recovered.csv", delimiter=",", comments="#", skiprows=2)[:, 1]
    np.testing.assert_allclose(got, x0, atol=1e-6)

    np.savetxt(tmp_path / "phi2.csv", np.array([[1.0, 0.0], [1.0, 0.0]]), delimiter=",")
    np.savetxt(tmp_path / "y2.csv", np.array([1.0, 2.0]), delimiter=",")
    assert run("recover", "--matrix", str(tmp_path / "phi2.csv"), "--measurements", str(tmp_path / "y2.csv"),
               "--out", str(tmp_path)) == 3
    assert run("recover", "--matrix", str(tmp_path / "absent.csv"), "--measurements", str(tmp_path / "y2.csv")) == 4


def test_unwritable_output_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run("phase", "--out", str(blocker / "sub"), "trials=1", "M_list=[10]") == 4


def test_com_verify_and_simulate_outputs(tmp_path):
    assert run("com-verify", "--out", str(tmp_path), "trials=100", "com_M=[8]", "com_K=[2]", "com_eps=[0.5]") == 0
    lines = (tmp_path / "com.csv").read_text().splitlines()
    assert lines[1] == "regime,M,K,epsilon,bound,empirical,trials,seed"
    assert run("simulate", "--config", "fig1", "--out", str(tmp_path), "--svg") == 0
    assert (tmp_path / "simulate.svg").read_text().startswith("<svg")


def test_svg_is_deterministic(tmp_path):
    for d in ("a", "b"):
        assert run("noise", "--config", "fig5a", "--out", str(tmp_path / d), "trials=3", "--svg") == 0
    assert (tmp_path / "a" / "noise.svg").read_bytes() == (tmp_path / "b" / "noise.svg").read_bytes()


def test_shipped_configs_parse():
    for name in ("fig1", "fig3a", "fig3b", "fig4a", "fig4b", "fig5a", "fig5b", "fig6a", "fig6b", "com"):
        path = cli.builtin_config(name)
        assert path is not None, name
        data = json.loads(path.read_text())
        cli.load_config(str(path), [], data["experiment"])


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "compobs.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("compobs ")
