import math

import numpy as np
import pytest

from conftest import make_point_payload, make_quad
from slungsim import NumericError
from slungsim.backend import kernels
from slungsim.dynamics import CableSystem
from slungsim.integrator import inject_noise, locate_event, rk4_step, simulate
from slungsim.logio import write_log
from slungsim.scenario import NoiseSpec, load_scenario, scenario_preset_path
from slungsim.so3 import quat_conjugate, quat_multiply, rotation_angle

G = 9.81


class TestRK4:
    def test_zero_derivative_fixed_point(self):
        x = np.array([1.0, -2.0, 3.0])
        out = rk4_step(lambda s, u: np.zeros(3), x, None, 0.05)
        assert np.array_equal(out, x)

    def test_scalar_exponential(self):
        # classical RK4 truncation of e^h at h = 0.1
        out = rk4_step(lambda s, u: s, np.array([1.0]), None, 0.1)
        assert abs(out[0] - 1.1051708333333333) < 1e-15
        assert abs(out[0] - math.exp(0.1)) < 1e-7

    def test_nonfinite_derivative_raises(self):
        def bad(s, u):
            return np.array([np.nan, 1.0])
        with pytest.raises(NumericError, match="block"):
            rk4_step(bad, np.zeros(2), None, 0.1)

    def test_order_four_convergence(self):
        # driven taut pendulum, fixed input: halving dt cuts the error ~16x
        sys = CableSystem(payload=make_point_payload(0.1),
                          robots=[make_quad()], lengths=[0.5])
        x0 = np.zeros(26)
        xi = np.array([math.sin(0.5), 0.0, -math.cos(0.5)])
        x0[0:3] = 0.5 * xi
        x0[3:6] = [0.0, 0.4, 0.0]
        x0[6] = 1.0
        x0[19] = 1.0
        u = np.array([0.35 * G, 0.0, 0.0, 0.0])
        taut = np.ones(1, dtype=np.uint8)
        renorm = np.zeros(1)

        def run(dt, t_end=0.5):
            x = x0.copy()
            out = np.empty_like(x)
            for _ in range(int(round(t_end / dt))):
                st = kernels.rk4_cable_step(out, x, u, taut, sys.param_buf,
                                            dt, True, renorm)
                assert st == 0
                x = out.copy()
            return x

        ref = run(0.004 / 16)
        e1 = np.linalg.norm(run(0.004) - ref)
        e2 = np.linalg.norm(run(0.002) - ref)
        ratio = e1 / e2
        assert 13.0 <= ratio <= 19.0


class TestLocateEvent:
    def test_linear_crossing(self):
        v = 0.8
        deriv = lambda s, u: np.array([v])
        x0 = np.array([1.0 - 0.5 * v])         # crosses level 1.0 at t = 0.5
        guard = lambda s: s[0] - 1.0
        t_event, x_event = locate_event(deriv, x0, None, 1.0, guard)
        assert abs(t_event - 0.5) <= 1e-9 + 1e-12
        assert guard(x_event) >= 0.0           # post-crossing side

    def test_no_crossing_raises(self):
        deriv = lambda s, u: np.array([0.0])
        with pytest.raises(NumericError):
            locate_event(deriv, np.array([0.0]), None, 1.0, lambda s: s[0] - 1.0)

    def test_free_fall_quadratic_root(self):
        # separation grows as d0 + g t^2 / 2; cable snaps taut at the
        # analytic root (RK4 is exact on quadratics, so only the bisection
        # window limits the accuracy)
        d0, l = 0.3, 0.5
        deriv = lambda s, u: np.array([s[1], -G])
        x0 = np.array([-d0, 0.0])
        guard = lambda s: (-s[0]) - l
        t_star = math.sqrt(2.0 * (l - d0) / G)
        t_event, _ = locate_event(deriv, x0, None, 0.5, guard)
        assert abs(t_event - t_star) <= 1e-8


class TestNoise:
    def layout(self):
        return dict(n_robots=1, point_mass=True)

    def test_zero_sigma_bitwise(self, rng):
        x = rng.standard_normal(26)
        out = inject_noise(x, NoiseSpec(), rng, **self.layout())
        assert out is x

    def test_seed_determinism(self, rng):
        x = rng.standard_normal(26)
        spec = NoiseSpec(position=1e-3, velocity=1e-3, quat_tangent=1e-3,
                         angular_velocity=1e-3)
        a = inject_noise(x, spec, np.random.default_rng(7), **self.layout())
        b = inject_noise(x, spec, np.random.default_rng(7), **self.layout())
        assert np.array_equal(a, b)

    def test_quaternion_blocks_stay_unit(self, rng):
        x = np.zeros(26)
        x[6] = 1.0
        q = rng.standard_normal(4)
        x[19:23] = q / np.linalg.norm(q)
        spec = NoiseSpec(quat_tangent=0.05)
        out = inject_noise(x, spec, np.random.default_rng(3), **self.layout())
        assert abs(np.linalg.norm(out[19:23]) - 1.0) < 1e-12

    def test_mean_rotation_angle_statistic(self):
        # |sigma| of an isotropic 3-D Gaussian has mean sigma*2*sqrt(2/pi)
        sigma = 1e-3
        rng = np.random.default_rng(123)
        q = np.array([1.0, 0.0, 0.0, 0.0])
        x = np.zeros(26)
        x[6] = 1.0
        x[19:23] = q
        spec = NoiseSpec(quat_tangent=sigma)
        n = 100000
        total = 0.0
        for _ in range(n):
            out = inject_noise(x, spec, rng, n_robots=1, point_mass=True)
            rel = quat_multiply(quat_conjugate(q), out[19:23])
            total += rotation_angle(rel)
        expected = sigma * 2.0 * math.sqrt(2.0 / math.pi)
        assert abs(total / n - expected) / expected < 0.05


def load_preset(name, **overrides):
    spec = load_scenario(scenario_preset_path(name))
    for key, val in overrides.items():
        setattr(spec.sim, key, val)
    return spec


class TestSimulate:
    def test_zero_duration_single_row(self):
        spec = load_preset("single_cable_hover", t_final=0.0)
        result = simulate(spec)
        assert len(result.rows) == 1
        assert result.rows[0][0] == 0.0

    def test_hover_stays_put(self):
        spec = load_preset("single_cable_hover", t_final=3.0)
        result = simulate(spec)
        final = result.rows[-1]
        err = np.linalg.norm(final[1:4] - np.array([0.0, 0.0, 0.5]))
        assert err < 0.02
        assert result.max_taut_residual <= 1e-5
        # every logged robot quaternion stays unit
        arr = result.array()
        qs = arr[:, result.columns.index("q1_w"):result.columns.index("q1_w") + 4]
        assert np.abs(np.linalg.norm(qs, axis=1) - 1.0).max() < 1e-9

    def test_slack_drop_single_collision(self):
        spec = load_preset("slack_drop")
        result = simulate(spec)
        regained = [ev for ev in result.events if ev.reestablished]
        assert len(regained) == 1
        ev = regained[0]
        # post-reset along-cable relative speed vanishes
        arr = result.array()
        cols = result.columns
        row = arr[np.flatnonzero(arr[:, cols.index("event")] == 1.0)[0]]
        xl = row[cols.index("xL_x"):cols.index("xL_x") + 3]
        vl = row[cols.index("vL_x"):cols.index("vL_x") + 3]
        xq = row[cols.index("x1_x"):cols.index("x1_x") + 3]
        vq = row[cols.index("v1_x"):cols.index("v1_x") + 3]
        xi = (xl - xq) / np.linalg.norm(xl - xq)
        assert abs(xi @ (vl - vq)) <= 1e-9
        # collision distance reached the cable length
        assert abs(np.linalg.norm(xl - xq) - 0.5) < 1e-6

    def test_ballistic_slack_payload(self):
        # long cable: payload free-falls for the whole horizon
        spec = load_preset("slack_drop", t_final=1.0)
        spec.mechanism.cable_lengths = [30.0]
        result = simulate(spec)
        assert not result.events
        arr = result.array()
        cols = result.columns
        t = arr[:, 0]
        z = arr[:, cols.index("xL_z")]
        z0 = -0.15, 0.0
        closed = 0.7401923788646684 - 0.5 * G * t * t
        assert np.abs(z - closed).max() < 1e-6

    def test_determinism_byte_identical(self, tmp_path):
        spec = load_preset("slack_drop", t_final=1.0)
        a = simulate(spec)
        b = simulate(load_preset("slack_drop", t_final=1.0))
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        write_log(a.rows, a.columns, pa)
        write_log(b.rows, b.columns, pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_noise_determinism_and_stability(self):
        spec = load_preset("single_cable_hover", t_final=1.0)
        spec.sim.noise = NoiseSpec(position=1e-3, velocity=1e-3,
                                   quat_tangent=1e-3, angular_velocity=1e-3)
        a = simulate(spec)
        spec2 = load_preset("single_cable_hover", t_final=1.0)
        spec2.sim.noise = NoiseSpec(position=1e-3, velocity=1e-3,
                                    quat_tangent=1e-3, angular_velocity=1e-3)
        b = simulate(spec2)
        assert np.array_equal(a.array(), b.array())
        assert np.isfinite(a.array()).all()


class TestEnergyConservation:
    def test_zero_input_taut_energy_drift(self):
        sys = CableSystem(payload=make_point_payload(0.1),
                          robots=[make_quad()], lengths=[0.5])
        x = np.zeros(26)
        xi = np.array([math.sin(0.6), 0.0, -math.cos(0.6)])
        x[13:16] = [0.0, 0.0, 2.0]
        x[0:3] = x[13:16] + 0.5 * xi
        x[3:6] = [0.0, 1.0, 0.0]     # tangential swing
        x[6] = 1.0
        x[19] = 1.0
        u = np.zeros(4)
        taut = np.ones(1, dtype=np.uint8)
        renorm = np.zeros(1)

        def energy(state):
            e = 0.5 * 0.25 * state[16:19] @ state[16:19] + 0.25 * G * state[15]
            e += 0.5 * 0.1 * state[3:6] @ state[3:6] + 0.1 * G * state[2]
            return e

        e0 = energy(x)
        out = np.empty_like(x)
        worst = 0.0
        for _ in range(2000):
            st = kernels.rk4_cable_step(out, x, u, taut, sys.param_buf,
                                        1e-3, True, renorm)
            assert st == 0
            x = out.copy()
            worst = max(worst, abs(energy(x) - e0))
        assert worst / abs(e0) < 1e-4
