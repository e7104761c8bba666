import csv
import json

import numpy as np
import pytest

from kpo.dynamics import SystemParams
from kpo.errors import ConfigError
from kpo.harness import (
    CSV_COLUMNS,
    FilterSpec,
    OptimizerConfig,
    SweepConfig,
    build_filter,
    evaluate_point,
    filter_from_control_points,
    fit_gaussian_profile,
    reproduce,
    run_sweep,
)
from kpo.pulses import TimeGrid, gaussian_filter


def small_config(**over):
    base = dict(
        beta_grid=(0.3,),
        kerr_grid=(0.5,),
        filters=(FilterSpec("boxcar", (1.0,)),),
        rtol=1e-6,
        atol=1e-9,
    )
    base.update(over)
    return SweepConfig(**base)


def test_filter_spec_validation():
    with pytest.raises(ConfigError):
        FilterSpec("triangle", (1.0,))
    with pytest.raises(ConfigError):
        FilterSpec("boxcar", ())


def test_sweep_config_threshold_guard():
    with pytest.raises(ConfigError):
        SweepConfig(beta_grid=(0.6,), kerr_grid=(0.0,), filters=(FilterSpec("boxcar", (1.0,)),))


def test_sweep_config_json_roundtrip(tmp_path):
    cfg = small_config()
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_json_dict()))
    assert SweepConfig.from_json(path) == cfg


def test_build_filter_kinds():
    box = build_filter(FilterSpec("boxcar", (2.0,)), 2.0, 60)
    assert box.kind == "boxcar"
    gauss = build_filter(FilterSpec("gaussian", (0.5,)), 0.5, 60)
    assert gauss.kind == "gaussian"
    # Center sits at 5 sigma so the profile fits the window.
    t_peak = gauss.times[np.argmax(gauss.samples)]
    assert t_peak == pytest.approx(2.5, abs=gauss.grid.dt)


def test_evaluate_point_captures_failures(monkeypatch):
    import kpo.harness as harness_mod
    from kpo.errors import TruncationError

    def boom(*args, **kwargs):
        raise TruncationError("synthetic truncation failure")

    monkeypatch.setattr(harness_mod, "output_mode_state", boom)
    rec = evaluate_point(0.3, 0.5, FilterSpec("boxcar", (1.0,)), 1.0, small_config())
    assert rec.metrics is None
    assert "TruncationError" in rec.error


def test_run_sweep_csv_schema(tmp_path):
    table = run_sweep(small_config())
    out = tmp_path / "sweep.csv"
    table.write_csv(out)
    lines = out.read_text().splitlines()
    assert lines[0] == "# schema=kpo-sweep-v1"
    assert lines[1].startswith("# ")
    rows = list(csv.reader(lines[2:]))
    assert rows[0] == list(CSV_COLUMNS)
    assert len(rows) == 2
    assert rows[1][-1] == ""  # no error
    assert float(rows[1][4]) > 0  # squeezing column populated


def test_filter_from_control_points_normalized():
    f = filter_from_control_points(np.array([0, 1, 2, 1, 0.5, 0]), 10.0)
    assert np.trapezoid(f.samples**2, f.times) == pytest.approx(1.0, abs=1e-9)
    assert f.samples[0] == 0.0 and f.samples[-1] == 0.0


def test_fit_gaussian_profile_self_consistent():
    grid = TimeGrid(0.0, 20.0, 400)
    f = gaussian_filter(10.0, 1.7, 0.0, grid)
    mu, sigma, rms = fit_gaussian_profile(f)
    assert mu == pytest.approx(10.0, abs=1e-6)
    assert sigma == pytest.approx(1.7, abs=1e-6)
    assert rms < 1e-8


def test_optimizer_config_validation():
    with pytest.raises(ConfigError):
        OptimizerConfig(n_points=4)
    with pytest.raises(ConfigError):
        OptimizerConfig(restarts=0)
    with pytest.raises(ConfigError):
        OptimizerConfig(objective="purity")


def test_reproduce_unknown_figure(tmp_path):
    with pytest.raises(ConfigError):
        reproduce("fig99", tmp_path)


def test_reproduce_fig2_fig3(tmp_path):
    files2 = reproduce("fig2", tmp_path / "f2")
    files3 = reproduce("fig3", tmp_path / "f3")
    assert len(files2) == 2 and len(files3) == 4
    with open(files2[0]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:4] == ["T", "s", "detV", "s_cavity"]
    assert len(rows) == 122
