import json
import math

import numpy as np
import pytest

from chiralsim.errors import DomainError
from chiralsim.sweeps import (SweepSpec, run_sweep, sweep_isolation_vs_alpha,
                              sweep_isolation_vs_damping, sweep_pump_leakage,
                              sweep_residual_coupling)


def _point(spec, point):
    if point["x"] < 0:
        raise DomainError("negative")
    return {"y": point["x"] ** 2, "z": spec.base["k"]}


def test_run_sweep_records_failures_and_order():
    spec = SweepSpec("toy", {"x": [-1.0, 0.5, 2.0]}, ["y"], {"k": 3})
    res = run_sweep(spec, _point)
    assert res.columns == ["index", "x", "y", "z", "status"]
    assert [r[-1] for r in res.rows] == ["domain", "ok", "ok"]
    assert math.isnan(res.rows[0][2]) and res.rows[2][2] == 4.0


def test_parallel_matches_serial():
    spec = SweepSpec("toy", {"x": [0.1, 0.2, 0.3, 0.4]}, ["y"], {"k": 1})
    assert run_sweep(spec, _point, workers=2).rows == run_sweep(spec, _point).rows


def test_unknown_exception_propagates():
    spec = SweepSpec("toy", {"x": [0.0, 1.0]}, ["y"], {})
    with pytest.raises(KeyError):
        run_sweep(spec, _point)


def test_axis_validation():
    with pytest.raises(DomainError):
        SweepSpec("bad", {"x": [1.0]}, [])
    with pytest.raises(DomainError):
        SweepSpec("bad", {}, [])


def test_write_with_metadata(tmp_path):
    res = sweep_isolation_vs_damping((0.0, 0.1))
    path = res.write(tmp_path / "d.csv")
    meta = json.loads(path.with_suffix(".meta.json").read_text())
    assert meta["n_rows"] == 2 and len(meta["config_hash"]) == 64
    assert path.read_text().splitlines()[0].startswith("index,gamma_i_ratio,gamma1_mhz")


def test_damping_sweep_values():
    res = sweep_isolation_vs_damping((0.0, 0.01, 0.1, 0.2))
    iso, il = res.column("isolation_db"), res.column("insertion_loss_db")
    assert iso[0] == 100.0 and il[0] == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.diff(iso) < 0) and np.all(np.diff(il) > 0)
    assert iso[1] == pytest.approx(52.19, abs=0.01)


def test_leakage_sweep_monotone():
    iso = sweep_pump_leakage((0.0, 0.2, 0.5)).column("isolation_db")
    assert np.all(np.diff(iso) < 0)


def test_alpha_sweep_reduces_insertion_loss():
    res = sweep_isolation_vs_alpha((0.05, 0.1, 0.29))
    il = res.column("insertion_loss_db")
    assert np.all(np.diff(il) > 0)
    assert res.column("damping_scale")[-1] == 1.0


@pytest.mark.xfail(strict=True, reason="at fixed g the measured-device isolation falls slightly as losses shrink")
def test_alpha_sweep_improves_isolation():
    iso = sweep_isolation_vs_alpha((0.05, 0.1, 0.29)).column("isolation_db")
    assert np.all(np.diff(iso) < 0)


def test_residual_coupling_directionality():
    res = sweep_residual_coupling((0.5, 1.0, 1.2))
    rf = res.column("right_fraction")
    assert rf[1] > 0.999 and rf[0] < rf[1] and rf[2] < rf[1]
    with pytest.raises(DomainError):
        sweep_residual_coupling((0.0, 1.0))
