import json
import subprocess
import sys

import numpy as np
import pytest

from sagnacsim import io as sio
from sagnacsim.cli import PRESETS, SCENARIOS, main, resolve_config, substream_seed
from sagnacsim.errors import ConfigError


def run_cli(*args):
    return main([str(a) for a in args])


def summary(path):
    return json.loads((path / "summary.json").read_text())


def outputs(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.name != "manifest.json"}


def test_run_jsi(tmp_path):
    assert run_cli("run", "jsi", "--preset", "paper-chip1", "--output-dir", tmp_path) == 0
    doc = summary(tmp_path)
    assert 0.96 <= doc["purity"] <= 0.995
    s, i, v = sio.read_grid(tmp_path / "jsi.csv")
    assert v.shape == (256, 256) and np.all(v >= 0)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["preset"] == "paper-chip1"
    assert set(manifest["outputs"]) == set(outputs(tmp_path))


def test_run_fidelity_vs_r(tmp_path):
    assert run_cli("run", "fidelity-vs-R", "--r-max", "0.1", "--points", "100", "--output-dir", tmp_path) == 0
    rows = np.loadtxt(tmp_path / "fidelity_vs_R.csv", delimiter=",", skiprows=1)
    assert rows.shape == (100, 2)
    assert rows[0, 1] == 1.0
    assert np.all(np.diff(rows[:, 1]) <= 0)
    assert rows[-1, 0] == pytest.approx(0.1)


def test_run_fringes_fig2_layout(tmp_path):
    assert run_cli("run", "fringes", "--preset", "paper-fig2", "--output-dir", tmp_path) == 0
    names = {p.name for p in tmp_path.glob("jsi_*.csv")}
    assert names == {"jsi_HV_768nm.csv", "jsi_DD_768nm.csv", "jsi_HV_772nm.csv", "jsi_DD_772nm.csv"}
    panels = summary(tmp_path)["panels"]
    assert [p["pump_wavelength"] for p in panels] == [768, 772]
    for p in panels:
        assert abs(p["angle_estimated_deg"] - p["angle_analytic_deg"]) < 2.0


@pytest.mark.parametrize("scenario", SCENARIOS)
def test_every_scenario_runs(tmp_path, scenario):
    assert run_cli("run", scenario, "--output-dir", tmp_path, "--seed", 3) == 0
    assert summary(tmp_path)["scenario"] == scenario


def test_presets_list(capsys):
    assert run_cli("presets", "list") == 0
    names = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
    assert names == list(PRESETS)
    assert "paper-chip1" in names


def _validate(tmp_path, capsys, doc):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    code = run_cli("validate", path)
    return code, json.loads(capsys.readouterr().out)


def test_validate_valid(tmp_path, capsys):
    code, report = _validate(tmp_path, capsys, {"preset": "paper-chip1", "scenario": "jsi"})
    assert code == 0 and report == {"valid": True, "violations": []}


def test_validate_negative_length(tmp_path, capsys):
    code, report = _validate(tmp_path, capsys, {"crystal_length": -1})
    assert code == 2
    assert len(report["violations"]) == 1 and "crystal_length" in report["violations"][0]


def test_validate_unknown_key(tmp_path, capsys):
    code, report = _validate(tmp_path, capsys, {"crystal_lenght": 9})
    assert code == 2 and report["violations"] == ["crystal_lenght: unknown key"]


def test_schema_error_exit_code(tmp_path, capsys):
    assert run_cli("run", "jsi", "--pump-fwhm", "-2", "--output-dir", tmp_path) == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["exit_code"] == 2 and err["error"] == "schema"
    assert not list(tmp_path.iterdir())


def test_unknown_flag_rejected(tmp_path, capsys):
    assert run_cli("run", "jsi", "--no-such-option", "1", "--output-dir", tmp_path) == 2
    assert "no_such_option" in json.loads(capsys.readouterr().err)["message"]


def test_numerical_error_exit_code(tmp_path, capsys):
    # vacuum source: nothing to herald
    assert run_cli("run", "g2", "--mean-pairs", "0", "--output-dir", tmp_path) == 3
    assert json.loads(capsys.readouterr().err)["exit_code"] == 3


def test_io_error_exit_code(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run_cli("run", "loss-budget", "--output-dir", blocker / "sub") == 4
    assert json.loads(capsys.readouterr().err)["error"] == "io"


def test_precedence(tmp_path):
    cfg = resolve_config("paper-chip2", {"reflectivity": 0.01, "seed": 4}, {"reflectivity": 0.03})
    assert cfg["reflectivity"] == 0.03 and cfg["seed"] == 4
    assert resolve_config("paper-chip2")["reflectivity"] == 0.0006
    assert resolve_config()["reflectivity"] == 0.02
    with pytest.raises(ConfigError):
        resolve_config("no-such-preset")


def test_substreams_distinct():
    names = ["tomography-counts", "tomography-resample", "g2", "power-noise"]
    seeds = {substream_seed(7, n) for n in names}
    assert len(seeds) == len(names)
    assert substream_seed(7, "g2") == substream_seed(7, "g2")


@pytest.mark.parametrize("scenario", ["power-scan", "g2"])
def test_byte_identical_reruns(tmp_path, scenario):
    dirs = []
    for k, workers in enumerate((1, 4, 1)):
        d = tmp_path / str(k)
        assert run_cli("run", scenario, "--seed", 11, "--output-dir", d, "--workers", workers) == 0
        dirs.append(outputs(d))
    assert dirs[0] == dirs[1] == dirs[2]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "sagnacsim", "run", "loss-budget", "--output-dir", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    doc = summary(tmp_path)
    assert doc["signal_total"] == pytest.approx(0.479655, abs=1e-12)
