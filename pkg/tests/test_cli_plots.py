import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from slungsim import LogIOError
from slungsim.cli import main
from slungsim.integrator import simulate
from slungsim.logio import write_log
from slungsim.planner import PolySpline
from slungsim.plots import emit_plots
from slungsim.scenario import load_scenario, scenario_preset_path, save_scenario


@pytest.fixture(scope="module")
def short_hover(tmp_path_factory):
    root = tmp_path_factory.mktemp("cfg")
    spec = load_scenario(scenario_preset_path("single_cable_hover"))
    spec.sim.t_final = 0.5
    path = root / "hover.yaml"
    save_scenario(spec, path)
    return path


@pytest.fixture(scope="module")
def short_drop(tmp_path_factory):
    root = tmp_path_factory.mktemp("cfg2")
    spec = load_scenario(scenario_preset_path("slack_drop"))
    spec.sim.t_final = 1.0
    path = root / "drop.yaml"
    save_scenario(spec, path)
    return path


@pytest.fixture(scope="module")
def rigid_log(tmp_path_factory):
    root = tmp_path_factory.mktemp("rigidlog")
    spec = load_scenario(scenario_preset_path("rigid_triangle_circle"))
    spec.sim.t_final = 0.3
    result = simulate(spec)
    path = root / "log.csv"
    write_log(result.rows, result.columns, path)
    return path


class TestCmdSim:
    def test_valid_config_exit_zero(self, short_hover, tmp_path):
        out = tmp_path / "run"
        assert main(["sim", "--config", str(short_hover), "--out", str(out)]) == 0
        assert (out / "log.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 0
        assert "wall_clock_s" in manifest

    def test_missing_config_exit_two(self, tmp_path):
        assert main(["sim", "--config", str(tmp_path / "nope.yaml"),
                     "--out", str(tmp_path / "o")]) == 2

    def test_same_seed_identical_logs(self, short_drop, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["sim", "--config", str(short_drop), "--out", str(out1),
                     "--seed", "5"]) == 0
        assert main(["sim", "--config", str(short_drop), "--out", str(out2),
                     "--seed", "5"]) == 0
        assert (out1 / "log.csv").read_bytes() == (out2 / "log.csv").read_bytes()
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        m1.pop("wall_clock_s"), m2.pop("wall_clock_s")
        m1.pop("out_dir"), m2.pop("out_dir")
        assert m1 == m2

    def test_duration_override(self, short_hover, tmp_path):
        out = tmp_path / "short"
        assert main(["sim", "--config", str(short_hover), "--out", str(out),
                     "--duration", "0.0"]) == 0
        assert len((out / "log.csv").read_text().splitlines()) == 2

    def test_sweep_multiple_configs(self, short_hover, short_drop, tmp_path):
        out = tmp_path / "sweep"
        assert main(["sim", "--config", str(short_hover), str(short_drop),
                     "--out", str(out), "--duration", "0.2"]) == 0
        assert (out / "hover" / "log.csv").exists()
        assert (out / "drop" / "log.csv").exists()


class TestCmdPlan:
    def waypoint_file(self, tmp_path):
        path = tmp_path / "wps.yaml"
        path.write_text(yaml.safe_dump({
            "times": [0.0, 1.0],
            "positions": [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
        }))
        return path

    def test_septic_coefficients(self, tmp_path):
        wps = self.waypoint_file(tmp_path)
        out = tmp_path / "spline.yaml"
        assert main(["plan", "--waypoints", str(wps), "--k", "4",
                     "--out", str(out)]) == 0
        spline = PolySpline.from_dict(yaml.safe_load(out.read_text()))
        known = np.array([0, 0, 0, 0, 35.0, -84.0, 70.0, -20.0])
        assert np.abs(spline.coeffs[0, 0] - known).max() < 1e-8

    def test_cubic_hermite(self, tmp_path):
        wps = self.waypoint_file(tmp_path)
        out = tmp_path / "spline.yaml"
        assert main(["plan", "--waypoints", str(wps), "--k", "2",
                     "--out", str(out)]) == 0
        spline = PolySpline.from_dict(yaml.safe_load(out.read_text()))
        assert np.abs(spline.coeffs[0, 0] - [0.0, 0.0, 3.0, -2.0]).max() < 1e-10

    def test_nonmonotone_times_exit_two(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump({
            "times": [0.0, 0.0],
            "positions": [[0, 0, 0], [1, 0, 0]],
        }))
        assert main(["plan", "--waypoints", str(path), "--k", "4",
                     "--out", str(tmp_path / "s.yaml")]) == 2

    def test_preset_slalom_plans(self, tmp_path):
        from slungsim.scenario import _PRESET_ROOT
        wps = Path(str(_PRESET_ROOT / "waypoints" / "slalom.yaml"))
        out = tmp_path / "slalom.yaml"
        assert main(["plan", "--waypoints", str(wps), "--k", "4",
                     "--out", str(out)]) == 0


class TestCmdPlot:
    def test_point_mass_log_three_plots(self, short_drop, tmp_path):
        run = tmp_path / "run"
        main(["sim", "--config", str(short_drop), "--out", str(run)])
        out = tmp_path / "plots"
        assert main(["plot", "--log", str(run / "log.csv"), "--out", str(out)]) == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == ["cables.png", "position.png", "velocity.png"]

    def test_rigid_log_four_plots(self, rigid_log, tmp_path):
        out = tmp_path / "plots"
        written = emit_plots(rigid_log, out)
        names = sorted(Path(p).name for p in written["paths"])
        assert names == ["cables.png", "orientation.png", "position.png",
                         "velocity.png"]

    def test_event_markers_present(self, short_drop, tmp_path):
        run = tmp_path / "run"
        main(["sim", "--config", str(short_drop), "--out", str(run)])
        written = emit_plots(run / "log.csv", tmp_path / "plots")
        assert written["event_markers"] >= 1

    def test_malformed_log_exit_four(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,xL_x\n0.0,oops\n")
        assert main(["plot", "--log", str(bad), "--out", str(tmp_path / "p")]) == 4

    def test_missing_columns_raises(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("t,a\n0.0,1.0\n")
        with pytest.raises(LogIOError, match="column"):
            emit_plots(bad, tmp_path / "p")
