import math

import numpy as np
import pytest

from slungsim.params import MechanismSpec, PayloadParams, QuadrotorParams
from slungsim.so3 import quat_to_rot


def make_quad(name="dragonfly", mass=0.25):
    return QuadrotorParams(
        name=name,
        mass=mass,
        arm_length=0.1075,
        inertia=np.array([0.601e-3, 0.589e-3, 1.076e-3]),
        motor_speed_min=5500.0,
        motor_speed_max=16400.0,
        thrust_coefficient=8.0e-7,
    )


def make_point_payload(mass=0.1):
    return PayloadParams(kind="point_mass", mass=mass,
                         attach_points=[np.zeros(3)])


def triangle_attach_points(radius=0.25):
    return [np.array([radius * math.cos(2 * math.pi * k / 3),
                      radius * math.sin(2 * math.pi * k / 3), 0.0])
            for k in range(3)]


def make_triangle_payload(mass=0.15, radius=0.25):
    j = mass * radius * radius
    return PayloadParams(
        kind="rigid_body", mass=mass,
        inertia=np.diag([0.25 * j, 0.25 * j, 0.5 * j]),
        attach_points=triangle_attach_points(radius),
    )


def random_unit(rng):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def random_quat(rng):
    q = rng.standard_normal(4)
    return q / np.linalg.norm(q)


def hang_state(payload_pos, rho, lengths, payload_quat=None, payload_vel=None,
               omega_l=None):
    """Flat state with every robot hanging taut, directly above its attach point."""
    n = len(lengths)
    if payload_quat is None:
        payload_quat = np.array([1.0, 0.0, 0.0, 0.0])
    if payload_vel is None:
        payload_vel = np.zeros(3)
    if omega_l is None:
        omega_l = np.zeros(3)
    r_l = quat_to_rot(payload_quat)
    x = np.zeros(13 + 13 * n)
    x[0:3] = payload_pos
    x[3:6] = payload_vel
    x[6:10] = payload_quat
    x[10:13] = omega_l
    for k in range(n):
        base = 13 + 13 * k
        p = payload_pos + r_l @ rho[k]
        x[base:base + 3] = p + lengths[k] * np.array([0.0, 0.0, 1.0])
        x[base + 3:base + 6] = payload_vel + r_l @ np.cross(omega_l, rho[k])
        x[base + 6] = 1.0
    return x


def random_taut_multi_state(rng, sys, speed=1.0, spin=1.0):
    """Random on-constraint state for a cable system: robots on their spheres
    with cable-consistent radial velocity (zero separation rate)."""
    n = sys.n_robots
    x = np.zeros(13 + 13 * n)
    x[0:3] = rng.uniform(-1, 1, 3)
    x[3:6] = speed * rng.standard_normal(3)
    x[6:10] = random_quat(rng)
    x[10:13] = spin * rng.standard_normal(3)
    r_l = quat_to_rot(x[6:10])
    for k in range(n):
        base = 13 + 13 * k
        p = x[0:3] + r_l @ sys.rho[k]
        pdot = x[3:6] + r_l @ np.cross(x[10:13], sys.rho[k])
        xi = random_unit(rng)
        x[base:base + 3] = p - sys.lengths[k] * xi
        tangential = rng.standard_normal(3)
        tangential -= (tangential @ xi) * xi
        x[base + 3:base + 6] = pdot - sys.lengths[k] * tangential
        x[base + 6:base + 10] = random_quat(rng)
        x[base + 10:base + 13] = spin * rng.standard_normal(3)
    return x


@pytest.fixture
def rng():
    return np.random.default_rng(987654321)
