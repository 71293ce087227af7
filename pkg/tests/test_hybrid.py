import numpy as np
import pytest

from conftest import make_point_payload, make_quad, make_triangle_payload, random_quat, random_unit
from slungsim import NumericError
from slungsim.dynamics import CableSystem
from slungsim.hybrid import (
    GuardEvent,
    all_cable_metrics,
    apply_reset,
    assemble_collision_system,
    cable_metrics,
    detect_guard,
    multi_reset,
    single_reset,
)
from slungsim.so3 import hat, quat_to_rot
from slungsim.state import CableStatus


def single_system():
    return CableSystem(payload=make_point_payload(0.1),
                       robots=[make_quad()], lengths=[0.5])


def triangle_system():
    return CableSystem(payload=make_triangle_payload(),
                       robots=[make_quad() for _ in range(3)],
                       lengths=[1.0, 1.0, 1.0])


def base_state(n):
    x = np.zeros(13 + 13 * n)
    x[6] = 1.0
    for k in range(n):
        x[13 + 13 * k + 6] = 1.0
    return x


def place_robot(x, k, pos, vel=None):
    base = 13 + 13 * k
    x[base:base + 3] = pos
    if vel is not None:
        x[base + 3:base + 6] = vel


def random_collision_state(rng, sys, radial_speed=1.0):
    """Robots exactly on their spheres with random (separating) velocities."""
    n = sys.n_robots
    x = base_state(n)
    x[0:3] = rng.uniform(-1, 1, 3)
    x[3:6] = rng.standard_normal(3)
    x[6:10] = random_quat(rng)
    x[10:13] = rng.standard_normal(3)
    r_l = quat_to_rot(x[6:10])
    for k in range(n):
        p = x[0:3] + r_l @ sys.rho[k]
        xi = random_unit(rng)
        place_robot(x, k, p - sys.lengths[k] * xi,
                    rng.standard_normal(3) * radial_speed)
    return x


class TestCableMetrics:
    def test_at_rest_below_attach(self):
        sys = single_system()
        x = base_state(1)
        x[0:3] = [0, 0, 0.5]
        place_robot(x, 0, [0, 0, 1.0])
        d, ddot = cable_metrics(x, sys, 0)
        assert abs(d - 0.5) < 1e-15
        assert ddot == 0.0

    def test_radial_recession(self):
        sys = single_system()
        x = base_state(1)
        x[0:3] = [0, 0, 0.5]
        place_robot(x, 0, [0, 0, 0.9], vel=[0, 0, 1.0])
        _, ddot = cable_metrics(x, sys, 0)
        assert abs(ddot - 1.0) < 1e-15

    def test_rate_matches_finite_difference(self, rng):
        sys = triangle_system()
        x = base_state(3)
        x[0:3] = [0.2, -0.1, 1.0]
        x[3:6] = [0.3, 0.1, -0.2]
        x[6:10] = random_quat(rng)
        x[10:13] = [0.5, -0.8, 1.1]
        r_l = quat_to_rot(x[6:10])
        for k in range(3):
            p = x[0:3] + r_l @ sys.rho[k]
            place_robot(x, k, p + np.array([0.1, 0.2, -0.9]),
                        vel=rng.standard_normal(3))
        d0, ddot = all_cable_metrics(x, sys)
        # advance payload pose and robot positions by dt along their velocities
        dt = 1e-6
        x2 = x.copy()
        x2[0:3] += dt * x[3:6]
        from slungsim.so3 import quat_derivative
        x2[6:10] += dt * quat_derivative(x[6:10], x[10:13])
        x2[6:10] /= np.linalg.norm(x2[6:10])
        for k in range(3):
            base = 13 + 13 * k
            x2[base:base + 3] += dt * x2[base + 3:base + 6]
        d1, _ = all_cable_metrics(x2, sys)
        assert np.abs((d1 - d0) / dt - ddot).max() < 1e-6

    def test_degenerate_geometry_raises(self):
        sys = single_system()
        x = base_state(1)
        x[0:3] = [0, 0, 1.0]
        place_robot(x, 0, [0, 0, 1.0])
        with pytest.raises(NumericError):
            cable_metrics(x, sys, 0)


class TestDetectGuard:
    def test_taut_approaching_is_not_an_event(self):
        sys = single_system()
        x = base_state(1)
        x[0:3] = [0, 0, 0.5]
        place_robot(x, 0, [0, 0, 1.0], vel=[0, 0, -0.3])   # ddot < 0, d == l
        assert detect_guard(x, CableStatus([True]), sys) is None

    def test_slack_reestablishing_tension(self):
        sys = single_system()
        x = base_state(1)
        x[0:3] = [0, 0, 0.5]
        place_robot(x, 0, [0, 0, 1.0], vel=[0, 0, 0.5])
        ev = detect_guard(x, CableStatus([False]), sys, t=1.25)
        assert ev is not None
        assert ev.reestablished == [0]
        assert ev.new_taut_count == 1
        assert ev.time == 1.25

    def test_taut_going_slack(self):
        sys = single_system()
        x = base_state(1)
        x[0:3] = [0, 0, 0.6]
        place_robot(x, 0, [0, 0, 1.0])   # d = 0.4 < l - tol
        ev = detect_guard(x, CableStatus([True]), sys)
        assert ev.went_slack == [0]
        assert ev.new_taut_count == 0

    def test_four_cable_joint_event(self):
        payload = make_triangle_payload()
        payload.attach_points.append(np.array([0.0, 0.0, 0.1]))
        payload = make_triangle_payload()
        rho4 = [*payload.attach_points, np.array([0.0, 0.0, 0.1])]
        payload4 = make_triangle_payload()
        payload4.attach_points = rho4
        sys = CableSystem(payload=payload4,
                          robots=[make_quad() for _ in range(4)],
                          lengths=[1.0] * 4)
        x = base_state(4)
        x[0:3] = [0, 0, 1.0]
        for k in range(4):
            p = x[0:3] + sys.rho[k]
            place_robot(x, k, p + np.array([0, 0, 1.0]))
        # cable 0: taut and separating -> I_p*; cable 3: slack, at length,
        # separating -> I_z'; cables 1, 2 quietly taut.
        place_robot(x, 0, x[0:3] + sys.rho[0] + [0, 0, 1.0], vel=[0, 0, 0.4])
        place_robot(x, 3, x[0:3] + sys.rho[3] + [0, 0, 1.0], vel=[0, 0, 0.6])
        status = CableStatus([True, True, True, False])
        ev = detect_guard(x, status, sys)
        assert ev.reestablished == [3]
        assert ev.jerked == [0]
        assert ev.went_slack == []
        assert ev.new_taut_count == 3 + 1
        assert ev.colliding == [0, 3]


class TestSingleReset:
    def test_no_relative_momentum_is_identity(self):
        sys = single_system()
        x = base_state(1)
        x[0:3] = [0, 0, 0.5]
        x[3:6] = [0.4, -0.1, 0.2]
        place_robot(x, 0, [0, 0, 1.0], vel=[0.4, -0.1, 0.2])
        out = single_reset(x, sys)
        assert np.abs(out - x).max() < 1e-15

    def test_momentum_balance_frozen_value(self):
        # m=0.25, mL=0.1, xi=-e3, robot at rest, payload falling at 1 m/s:
        # common along-cable velocity = (0.25*0 + 0.1*(-1)) / 0.35 = -2/7.
        sys = single_system()
        x = base_state(1)
        x[0:3] = [0, 0, 0.5]
        x[3:6] = [0, 0, -1.0]
        place_robot(x, 0, [0, 0, 1.0], vel=[0, 0, 0])
        out = single_reset(x, sys)
        expected = -0.2857142857142857
        assert abs(out[5] - expected) < 1e-15
        assert abs(out[18] - expected) < 1e-15

    def test_orthogonal_component_untouched(self):
        sys = single_system()
        x = base_state(1)
        x[0:3] = [0, 0, 0.5]
        x[3:6] = [1.0, 0, -0.5]
        place_robot(x, 0, [0, 0, 1.0])
        out = single_reset(x, sys)
        assert out[3] == 1.0 and out[4] == 0.0      # orthogonal payload velocity
        assert out[16] == 0.0 and out[17] == 0.0


class TestCollisionSystem:
    def test_empty_set_identity(self, rng):
        sys = triangle_system()
        x = random_collision_state(rng, sys)
        cs = assemble_collision_system(x, sys, [])
        j_l = sys.payload.inertia
        assert np.array_equal(cs.j_bar[0:3, 0:3], 0.15 * np.eye(3))
        assert np.array_equal(cs.j_bar[3:6, 3:6], j_l)
        assert np.abs(cs.j_bar[0:3, 3:6]).max() == 0.0
        twist = np.linalg.solve(cs.j_bar, cs.b)
        assert np.abs(twist[0:3] - x[3:6]).max() < 1e-12
        assert np.abs(twist[3:6] - x[10:13]).max() < 1e-12

    def test_symmetry_sweep(self, rng):
        sys = triangle_system()
        for _ in range(1000):
            x = random_collision_state(rng, sys)
            cs = assemble_collision_system(x, sys, [0, 1, 2])
            assert np.abs(cs.j_bar - cs.j_bar.T).max() <= 1e-10

    def test_positive_definite_sweep(self, rng):
        # Theorem-1 analogue checked numerically over random geometry.
        for _ in range(1000):
            payload = make_triangle_payload(mass=rng.uniform(0.05, 1.0),
                                            radius=rng.uniform(0.1, 0.5))
            robots = [make_quad(mass=rng.uniform(0.1, 1.5)) for _ in range(3)]
            sys = CableSystem(payload=payload, robots=robots, lengths=[1.0] * 3)
            x = random_collision_state(rng, sys)
            cs = assemble_collision_system(x, sys, [0, 1, 2])
            assert np.linalg.eigvalsh(cs.j_bar).min() > 0.0


def qp_reset_oracle(x, sys, colliding):
    """Minimum kinetic-energy-change impulse subject to along-cable matching.

    Independent of the closed-form solve: builds the KKT system of the
    constrained quadratic program in the velocities directly.
    """
    m_l = sys.payload.mass
    j_l = sys.payload.inertia
    r_l = quat_to_rot(x[6:10])
    nc = len(colliding)
    nv = 6 + 3 * nc
    mass = np.zeros((nv, nv))
    mass[0:3, 0:3] = m_l * np.eye(3)
    mass[3:6, 3:6] = j_l
    z_pre = np.concatenate([x[3:6], x[10:13]] +
                           [x[13 + 13 * i + 3:13 + 13 * i + 6] for i in colliding])
    cons = np.zeros((nc, nv))
    p_all = sys.attach_points(x)
    for row, i in enumerate(colliding):
        base = 13 + 13 * i
        delta = p_all[i] - x[base:base + 3]
        xi = delta / np.linalg.norm(delta)
        mass[6 + 3 * row:9 + 3 * row, 6 + 3 * row:9 + 3 * row] = sys.masses[i] * np.eye(3)
        cons[row, 0:3] = -xi
        cons[row, 3:6] = -np.cross(sys.rho[i], r_l.T @ xi)   # xi^T R rho_hat
        cons[row, 6 + 3 * row:9 + 3 * row] = xi
    kkt = np.zeros((nv + nc, nv + nc))
    kkt[0:nv, 0:nv] = mass
    kkt[0:nv, nv:] = cons.T
    kkt[nv:, 0:nv] = cons
    rhs = np.concatenate([mass @ z_pre, np.zeros(nc)])
    sol = np.linalg.solve(kkt, rhs)
    return sol[0:nv]


def kinetic_energy(x, sys):
    e = 0.5 * sys.payload.mass * (x[3:6] @ x[3:6])
    e += 0.5 * x[10:13] @ (sys.payload.inertia @ x[10:13])
    for k in range(sys.n_robots):
        v = x[13 + 13 * k + 3:13 + 13 * k + 6]
        e += 0.5 * sys.masses[k] * (v @ v)
    return e


class TestMultiReset:
    def make_event(self, colliding, n=3):
        taut = [i in colliding for i in range(n)]
        return GuardEvent(time=0.0, went_slack=[], reestablished=list(colliding),
                          jerked=[], new_taut_count=len(colliding))

    def test_reduction_to_single(self, rng):
        sys = CableSystem(payload=make_point_payload(0.1),
                          robots=[make_quad()], lengths=[0.5])
        for _ in range(50):
            x = base_state(1)
            x[0:3] = rng.uniform(-1, 1, 3)
            x[3:6] = rng.standard_normal(3)
            xi = random_unit(rng)
            place_robot(x, 0, x[0:3] - 0.5 * xi, vel=rng.standard_normal(3))
            a = single_reset(x, sys)
            b = multi_reset(x, sys, self.make_event([0], n=1))
            assert np.abs(a - b).max() < 1e-12

    def test_shared_velocity_is_identity(self, rng):
        sys = triangle_system()
        x = random_collision_state(rng, sys)
        v = rng.standard_normal(3)
        x[3:6] = v
        x[10:13] = 0.0
        for k in range(3):
            x[13 + 13 * k + 3:13 + 13 * k + 6] = v
        out = multi_reset(x, sys, self.make_event([0, 1, 2]))
        assert np.abs(out - x).max() < 1e-12

    def test_matches_qp_oracle(self, rng):
        sys = triangle_system()
        for _ in range(20):
            x = random_collision_state(rng, sys)
            colliding = sorted(rng.choice(3, size=rng.integers(1, 4), replace=False).tolist())
            out = multi_reset(x, sys, self.make_event(colliding))
            z = qp_reset_oracle(x, sys, colliding)
            assert np.abs(out[3:6] - z[0:3]).max() < 1e-8
            assert np.abs(out[10:13] - z[3:6]).max() < 1e-8
            for row, i in enumerate(colliding):
                base = 13 + 13 * i
                assert np.abs(out[base + 3:base + 6] - z[6 + 3 * row:9 + 3 * row]).max() < 1e-8

    def test_conservation_invariants(self, rng):
        sys = triangle_system()
        for _ in range(100):
            x = random_collision_state(rng, sys)
            colliding = sorted(rng.choice(3, size=rng.integers(1, 4), replace=False).tolist())
            out = multi_reset(x, sys, self.make_event(colliding))
            r_l = quat_to_rot(x[6:10])
            p_all = sys.attach_points(x)
            impulse_sum = np.zeros(3)
            torque_sum = np.zeros(3)
            for i in colliding:
                base = 13 + 13 * i
                delta = p_all[i] - x[base:base + 3]
                xi = delta / np.linalg.norm(delta)
                dv_par = ((xi @ out[base + 3:base + 6]) - (xi @ x[base + 3:base + 6])) * xi
                delta_i = sys.masses[i] * dv_par
                impulse_sum += delta_i
                torque_sum += np.cross(sys.rho[i], -(r_l.T @ delta_i))
                # along-cable agreement after the reset
                pdot_new = out[3:6] - r_l @ (hat(sys.rho[i]) @ out[10:13])
                assert abs(xi @ (pdot_new - out[base + 3:base + 6])) < 1e-10
            dv_l = out[3:6] - x[3:6]
            assert np.abs(impulse_sum + sys.payload.mass * dv_l).max() < 1e-9
            dom = out[10:13] - x[10:13]
            assert np.abs(torque_sum - sys.payload.inertia @ dom).max() < 1e-9
            # inelastic: kinetic energy never increases
            e_pre, e_post = kinetic_energy(x, sys), kinetic_energy(out, sys)
            assert e_post <= e_pre + 1e-12
            # positions and attitudes bitwise unchanged
            assert np.array_equal(out[0:3], x[0:3])
            assert np.array_equal(out[6:10], x[6:10])
            for k in range(3):
                base = 13 + 13 * k
                assert np.array_equal(out[base:base + 3], x[base:base + 3])
                assert np.array_equal(out[base + 6:base + 10], x[base + 6:base + 10])

    def test_energy_strictly_decreases_with_relative_motion(self, rng):
        sys = triangle_system()
        x = random_collision_state(rng, sys, radial_speed=2.0)
        out = multi_reset(x, sys, self.make_event([0, 1, 2]))
        assert kinetic_energy(out, sys) < kinetic_energy(x, sys) - 1e-6


class TestApplyReset:
    def test_flags_flip(self, rng):
        sys = triangle_system()
        x = random_collision_state(rng, sys)
        status = CableStatus([True, False, True])
        ev = GuardEvent(time=0.0, went_slack=[2], reestablished=[1], jerked=[],
                        new_taut_count=2)
        _, new_status = apply_reset(x, sys, status, ev)
        assert new_status.taut.tolist() == [True, True, False]
