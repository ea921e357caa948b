import hashlib
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pfvirial.errors import StateFileError
from pfvirial.io import dumps_json, load_state, save_state
from pfvirial.model import system_to_dict
from pfvirial.state import QuantumState

from conftest import coupled, ground, mode, system

CONFIGS = Path(__file__).resolve().parents[1] / "src" / "pfvirial" / "configs"


def run_cli(*args, env=None):
    return subprocess.run([sys.executable, "-m", "pfvirial", *map(str, args)], capture_output=True, text=True,
                          env=env)


def write_config(path, spec):
    path.write_text(json.dumps(system_to_dict(spec)))
    return path


# --------------------------------------------------------------------------
# state files


def test_state_round_trip(tmp_path):
    spec = coupled(41, n_max=6, lo=-5, hi=5)
    psi = ground(spec, "dense")
    save_state(psi, spec, tmp_path / "s.pfvw")
    again = load_state(tmp_path / "s.pfvw", spec)
    assert np.array_equal(again.coefficients, psi.coefficients)


def test_state_file_errors(tmp_path):
    spec = coupled(41, n_max=6, lo=-5, hi=5)
    path = tmp_path / "s.pfvw"
    save_state(ground(spec, "dense"), spec, path)
    data = path.read_bytes()
    with pytest.raises(StateFileError, match="hash mismatch"):
        load_state(path, coupled(41, n_max=7, lo=-5, hi=5))
    (tmp_path / "t").write_bytes(data[:-8])
    with pytest.raises(StateFileError, match="payload"):
        load_state(tmp_path / "t", spec)
    (tmp_path / "m").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(StateFileError, match="magic"):
        load_state(tmp_path / "m", spec)
    (tmp_path / "h").write_bytes(data[:10])
    with pytest.raises(StateFileError, match="truncated"):
        load_state(tmp_path / "h", spec)


def test_quantum_state_requires_normalization():
    with pytest.raises(ValueError):
        QuantumState(np.array([1.0, 1.0], dtype=complex))


def test_json_number_format():
    text = dumps_json({"b": 0.1, "a": 2.0, "n": math.nan, "i": 3, "t": True, "v": [1 / 3]})
    doc = json.loads(text)
    assert list(doc) == ["b", "a", "n", "i", "t", "v"]
    assert '"a": 2.0' in text and '"n": null' in text
    assert doc["v"][0] == 1 / 3
    assert "0.33333333333333331" in text


# --------------------------------------------------------------------------
# command line


def test_solve_writes_state_energies_and_manifest(tmp_path):
    spec = coupled(61, n_max=10, lo=-6, hi=6)
    cfg = write_config(tmp_path / "c.json", spec)
    out = tmp_path / "out"
    res = run_cli("solve", "--config", cfg, "--out", out, "--seed", 3)
    assert res.returncode == 0, res.stderr
    energies = json.loads((out / "energies.json").read_text())
    assert energies["energy"] == pytest.approx(ground(spec, "dense").energy, abs=1e-10)
    assert load_state(out / "state.pfvw", spec).dim == 61 * 11
    manifest = json.loads((out / "manifest.json").read_text())
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    assert manifest["seed"] == 3


def test_virial_report_exit_code_follows_checks(tmp_path):
    # h = 0.025 keeps the stencil error of the electronic virial below 1e-4
    spec = coupled(481, n_max=20, lo=-6, hi=6)
    cfg = write_config(tmp_path / "c.json", spec)
    ok = run_cli("virial-report", "--config", cfg, "--out", tmp_path / "a")
    assert ok.returncode == 0, ok.stderr
    report = json.loads((tmp_path / "a" / "virial_report.json").read_text())
    assert report["pass"] is True
    assert (tmp_path / "a" / "virial_summary.csv").read_text().startswith("identity,")
    strict = run_cli("virial-report", "--config", cfg, "--out", tmp_path / "b", "--tol", "electronic=1e-9")
    assert strict.returncode == 2
    assert "electronic_virial" in strict.stderr


def test_shipped_truncated_config_fails_its_checks(tmp_path):
    res = run_cli("virial-report", "--config", CONFIGS / "coupled_tiny_nmax.json", "--out", tmp_path)
    assert res.returncode == 2


@pytest.mark.parametrize("args, message", [
    (["--tol", "bogus=1"], "unknown tolerance"),
    (["--tol", "electronic"], "NAME=VALUE"),
    (["--tol", "electronic=-1"], "positive"),
    (["--threads", "0"], "threads"),
])
def test_usage_errors_exit_one(tmp_path, args, message):
    cfg = write_config(tmp_path / "c.json", system(21, lo=-4, hi=4))
    res = run_cli("solve", "--config", cfg, "--out", tmp_path / "o", *args)
    assert res.returncode == 1
    assert message in res.stderr


def test_invalid_system_exits_one(tmp_path):
    doc = system_to_dict(system(21, lo=-4, hi=4, modes=(mode(n_max=3),)))
    doc["modes"][0]["omega"] = -1.0
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(doc))
    res = run_cli("solve", "--config", cfg, "--out", tmp_path / "o")
    assert res.returncode == 1
    assert "mode frequency must be positive" in res.stderr
    missing = run_cli("solve", "--config", tmp_path / "nope.json", "--out", tmp_path / "o")
    assert missing.returncode == 1
    assert run_cli("explode", "--config", cfg, "--out", tmp_path).returncode == 1


def test_threads_from_environment(tmp_path):
    import os

    cfg = write_config(tmp_path / "c.json", system(21, lo=-4, hi=4))
    env = dict(os.environ, PFV_THREADS="1")
    res = run_cli("solve", "--config", cfg, "--out", tmp_path / "o", env=env)
    assert res.returncode == 0, res.stderr
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["threads"] == 1
    env["PFV_THREADS"] = "many"
    assert run_cli("solve", "--config", cfg, "--out", tmp_path / "p", env=env).returncode == 1


def test_scf_command(tmp_path):
    spec = coupled(61, lam=0.1, drive=0.2, n_max=20, lo=-6, hi=6, treatment="classical")
    cfg = write_config(tmp_path / "c.json", spec)
    res = run_cli("scf", "--config", cfg, "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    doc = json.loads((tmp_path / "mean_field.json").read_text())
    assert doc["converged"] is True
    assert doc["force_balance"][0]["pass"] is True


def test_ks_invert_command(tmp_path):
    spec = coupled(161, lam=0.1, n_max=20, lo=-8, hi=8)
    cfg = write_config(tmp_path / "c.json", spec)
    res = run_cli("ks-invert", "--config", cfg, "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    pot = json.loads((tmp_path / "ks_potential.json").read_text())
    assert len(pot["v_s"]) == 161 and min(pot["v_s"]) == 0.0
    assert json.loads((tmp_path / "ks_report.json").read_text())["pass"] is True


def test_mass_renorm_command(tmp_path):
    res = run_cli("mass-renorm", "--config", CONFIGS / "freespace_light_cutoff.json", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    doc = json.loads((tmp_path / "mass_renorm.json").read_text())
    assert doc["mu_continuum"] == pytest.approx(0.003097092600326831, rel=1e-14)


def test_shipped_configs_parse():
    from pfvirial.model import check_system, freespace_from_dict, system_from_dict

    for path in sorted(CONFIGS.glob("*.json")):
        doc = json.loads(path.read_text())
        if path.name.startswith("freespace"):
            freespace_from_dict(doc)
        else:
            check_system(system_from_dict(doc))
