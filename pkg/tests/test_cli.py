import json
import subprocess
import sys

import pytest

from chiralsim.cli import (EXIT_CONFIG, EXIT_OK, EXIT_PARAMS, EXIT_USAGE, run)


def _run(tmp_path, *args, name="out"):
    out = tmp_path / name
    return run(list(args) + ["--out", str(out)]), out


def test_smatrix_outputs(tmp_path):
    code, out = _run(tmp_path, "smatrix")
    assert code == EXIT_OK
    assert (out / "smatrix.csv").is_file() and (out / "validation.json").is_file()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "smatrix" and len(manifest["config_hash"]) == 64


def test_isolate_json_and_plot(tmp_path):
    code, out = _run(tmp_path, "isolate", "--format", "json", "--plot")
    assert code == EXIT_OK
    assert list(out.glob("*.svg")) and list(out.glob("*.json"))


def test_usage_errors(tmp_path):
    assert run([]) == EXIT_USAGE
    assert run(["frobnicate"]) == EXIT_USAGE
    assert run(["sweep", "nope", "--out", str(tmp_path)]) == EXIT_USAGE


def test_missing_config(tmp_path):
    code, out = _run(tmp_path, "smatrix", "--config", str(tmp_path / "missing.toml"))
    assert code == EXIT_CONFIG


def test_malformed_config(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[mode.a1\nfreq_ghz = ")
    assert _run(tmp_path, "smatrix", "--config", str(bad))[0] == EXIT_CONFIG


def test_invalid_parameters_still_write_manifest(tmp_path):
    cfg = tmp_path / "neg.toml"
    cfg.write_text("[pumps]\nleakage = 2.0\n")
    code, out = _run(tmp_path, "isolate", "--config", str(cfg))
    assert code == EXIT_PARAMS
    cfg.write_text("[wavepacket]\ngamma_ph_ratio = 3.0\n")
    code, out = _run(tmp_path, "emit", "--config", str(cfg), name="emit")
    assert code == EXIT_PARAMS and (out / "manifest.json").is_file()


def test_env_override_reaches_manifest(tmp_path, monkeypatch):
    monkeypatch.setenv("CHIRALSIM_PUMPS_G1_MHZ", "0.5")
    code, out = _run(tmp_path, "smatrix")
    assert code == EXIT_OK
    assert json.loads((out / "manifest.json").read_text())["config"]["pumps"]["g1_mhz"] == 0.5


def test_snail_and_fit(tmp_path):
    assert _run(tmp_path, "snail", name="s")[0] == EXIT_OK
    code, out = _run(tmp_path, "fit", "--seed", "4", name="f")
    assert code == EXIT_OK
    header = (out / "fit.csv").read_text().splitlines()[0]
    assert header.startswith("g_c_mhz,gamma_e_mhz")
    assert _run(tmp_path, "fit", "--trace", str(tmp_path / "none.csv"), name="g")[0] == EXIT_CONFIG


@pytest.mark.parametrize("argv,files", [
    (["smatrix"], ["smatrix.csv"]),
    (["fit", "--seed", "7"], ["fit.csv"]),
    (["sweep", "damping"], ["sweep_damping.csv"]),
    (["emit"], ["emission.csv", "emission_metrics.csv"]),
])
def test_byte_identical_outputs(tmp_path, argv, files):
    a = _run(tmp_path, *argv, name="a")[1]
    b = _run(tmp_path, *argv, name="b")[1]
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "chiralsim.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "chiralsim" in r.stdout
