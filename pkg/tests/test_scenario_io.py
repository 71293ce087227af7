import numpy as np
import pytest

from slungsim import ConfigError, LogIOError
from slungsim.logio import build_row, log_columns, read_log, write_log
from slungsim.params import MechanismSpec, PayloadParams
from slungsim.scenario import (
    list_scenario_presets,
    load_scenario,
    robot_preset,
    save_scenario,
    scenario_preset_path,
    spec_from_dict,
)

TABLE_PARAMS = {
    "dragonfly": dict(mass=0.25, arm_length=0.1075,
                      inertia=[0.601e-3, 0.589e-3, 1.076e-3],
                      motor_speed_min=5500, motor_speed_max=16400),
    "hummingbird": dict(mass=0.5, arm_length=0.17,
                        inertia=[2.64e-3, 2.64e-3, 4.96e-3],
                        motor_speed_min=1500, motor_speed_max=7500),
    "race": dict(mass=0.95, arm_length=0.10125,
                 inertia=[3.0e-3, 3.0e-3, 4.0e-3],
                 motor_speed_min=5500, motor_speed_max=23000),
}


class TestRobotPresets:
    @pytest.mark.parametrize("name", sorted(TABLE_PARAMS))
    def test_preset_values(self, name):
        quad = robot_preset(name)
        want = TABLE_PARAMS[name]
        assert quad.mass == want["mass"]
        assert quad.arm_length == want["arm_length"]
        assert np.array_equal(quad.inertia, want["inertia"])
        assert quad.motor_speed_min == want["motor_speed_min"]
        assert quad.motor_speed_max == want["motor_speed_max"]

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            robot_preset("flying_brick")


class TestScenarioLoad:
    def test_hover_preset_loads_dragonfly(self):
        spec = load_scenario(scenario_preset_path("single_cable_hover"))
        assert spec.robots[0].mass == 0.25
        assert spec.robots[0].inertia[0] == 0.601e-3
        assert spec.payload.mass == 0.1
        assert spec.mechanism.cable_lengths == [0.5]

    @pytest.mark.parametrize("name", [
        "single_cable_hover", "single_cable_circle", "triangle_cable_circle",
        "triangle_cable_yaw", "rigid_triangle_circle", "slack_drop",
    ])
    def test_roundtrip(self, name, tmp_path):
        spec = load_scenario(scenario_preset_path(name))
        out = tmp_path / "spec.yaml"
        save_scenario(spec, out)
        again = load_scenario(out)
        assert again == spec

    def test_presets_listed(self):
        names = list_scenario_presets()
        assert "single_cable_hover" in names
        assert "slack_drop" in names

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            load_scenario("/nonexistent/who.yaml")

    def test_parse_error_reports_line(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("system:\n  payload: {kind: point_mass\n")
        with pytest.raises(ConfigError, match="line"):
            load_scenario(bad)

    def base_dict(self):
        spec = load_scenario(scenario_preset_path("triangle_cable_circle"))
        return spec.to_dict()

    def test_count_mismatch_rejected(self):
        data = self.base_dict()
        data["system"]["payload"]["attach_points"] = data["system"]["payload"]["attach_points"][:2]
        with pytest.raises(ConfigError, match="attach"):
            spec_from_dict(data)

    def test_negative_cable_length_rejected(self):
        data = self.base_dict()
        data["system"]["mechanism"]["cable_lengths"] = [-1.0, 1.0, 1.0]
        with pytest.raises(ConfigError, match="cable"):
            spec_from_dict(data)

    def test_bad_initial_geometry_rejected(self):
        data = self.base_dict()
        data["initial"]["robots"] = [
            {"position": [0.25 + 1.0, 0.0, 3.0]},      # way off the sphere
            {"position": [-0.125, 0.21650635094610965, 2.0]},
            {"position": [-0.125, -0.21650635094610965, 2.0]},
        ]
        with pytest.raises(ConfigError, match="geometry"):
            spec_from_dict(data)

    def test_nonpositive_dt_rejected(self):
        data = self.base_dict()
        data["sim"]["dt"] = 0.0
        with pytest.raises(ConfigError, match="dt"):
            spec_from_dict(data)

    def test_point_mass_attach_point_invariant(self):
        with pytest.raises(ConfigError):
            PayloadParams(kind="point_mass", mass=0.1,
                          attach_points=[[0.1, 0.0, 0.0]])

    def test_mechanism_kind_checked(self):
        with pytest.raises(ConfigError):
            MechanismSpec(kind="rubber_band", cable_lengths=[1.0])


class TestLogIO:
    def test_header_only_for_empty_series(self, tmp_path):
        cols = log_columns(1, point_mass=True)
        path = tmp_path / "log.csv"
        write_log([], cols, path)
        text = path.read_text().splitlines()
        assert len(text) == 1
        assert text[0].split(",") == cols

    def test_two_rows_three_lines(self, tmp_path):
        cols = log_columns(1, point_mass=True)
        x = np.zeros(26)
        x[6] = 1.0
        x[19] = 1.0
        rows = [build_row(0.0, x, np.zeros(4), [True], np.zeros(3),
                          [1, 0, 0, 0], point_mass=True),
                build_row(0.001, x, np.zeros(4), [True], np.zeros(3),
                          [1, 0, 0, 0], point_mass=True)]
        path = tmp_path / "log.csv"
        write_log(rows, cols, path)
        assert len(path.read_text().splitlines()) == 3

    def test_monotone_time_enforced(self, tmp_path):
        cols = ["t", "a"]
        with pytest.raises(LogIOError, match="monotone"):
            write_log([np.array([1.0, 0.0]), np.array([0.5, 0.0])],
                      cols, tmp_path / "log.csv")

    def test_seventeen_significant_digits(self, tmp_path):
        cols = ["t", "a"]
        value = 0.1234567890123456789
        path = tmp_path / "log.csv"
        write_log([np.array([0.0, value])], cols, path)
        _, data = read_log(path)
        assert data[0, 1] == value      # round-trips exactly

    def test_read_rejects_malformed(self, tmp_path):
        path = tmp_path / "log.csv"
        path.write_text("t,a\n0.0,banana\n")
        with pytest.raises(LogIOError, match="malformed"):
            read_log(path)

    def test_row_width_check(self, tmp_path):
        with pytest.raises(LogIOError, match="fields"):
            write_log([np.zeros(3)], ["t", "a"], tmp_path / "log.csv")
