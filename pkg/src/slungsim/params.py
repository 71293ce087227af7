"""Physical parameter types: robots, payload, connection mechanism, gains."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .so3 import hat

RPM_TO_RADS = 2.0 * math.pi / 60.0
GRAVITY = 9.81


def _vec3(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ConfigError(f"{name} must have 3 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be finite")
    return arr


def _inertia_matrix(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape == (3,):
        arr = np.diag(arr)
    if arr.shape != (3, 3):
        raise ConfigError(f"{name} must be a 3-vector of diagonals or a 3x3 matrix")
    if np.abs(arr - arr.T).max() > 1e-12:
        raise ConfigError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(arr).min() <= 0.0:
        raise ConfigError(f"{name} must be positive definite")
    return arr


@dataclass
class QuadrotorParams:
    """Per-robot physical parameters.

    ``thrust_coefficient`` (N per (rad/s)^2 of a single rotor) is a
    repo-defined constant used only to derive actuator limits; it is not a
    measured platform value.
    """

    name: str
    mass: float
    arm_length: float
    inertia: np.ndarray            # diagonal (J_xx, J_yy, J_zz), kg m^2
    motor_speed_min: float         # RPM
    motor_speed_max: float         # RPM
    thrust_coefficient: float      # N / (rad/s)^2, per rotor

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float)
        if self.inertia.shape != (3,):
            raise ConfigError("quadrotor inertia must be the 3 diagonal entries")
        if self.mass <= 0.0:
            raise ConfigError(f"robot '{self.name}': mass must be > 0")
        if np.any(self.inertia <= 0.0):
            raise ConfigError(f"robot '{self.name}': inertia entries must be > 0")
        if self.motor_speed_max <= self.motor_speed_min:
            raise ConfigError(f"robot '{self.name}': max motor speed must exceed min")
        if self.arm_length <= 0.0 or self.thrust_coefficient <= 0.0:
            raise ConfigError(f"robot '{self.name}': arm length and thrust coefficient must be > 0")

    @property
    def max_thrust(self) -> float:
        """Total thrust of 4 rotors at max speed, N."""
        w = self.motor_speed_max * RPM_TO_RADS
        return 4.0 * self.thrust_coefficient * w * w

    @property
    def min_thrust(self) -> float:
        w = self.motor_speed_min * RPM_TO_RADS
        return 4.0 * self.thrust_coefficient * w * w

    @property
    def max_moment(self) -> float:
        """Moment-norm bound from one rotor pair at full differential, N m."""
        wmax = self.motor_speed_max * RPM_TO_RADS
        wmin = self.motor_speed_min * RPM_TO_RADS
        return self.arm_length * self.thrust_coefficient * (wmax * wmax - wmin * wmin)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mass": float(self.mass),
            "arm_length": float(self.arm_length),
            "inertia": [float(v) for v in self.inertia],
            "motor_speed_min": float(self.motor_speed_min),
            "motor_speed_max": float(self.motor_speed_max),
            "thrust_coefficient": float(self.thrust_coefficient),
        }


@dataclass
class PayloadParams:
    """Payload description: a point mass or a rigid body with attach points."""

    kind: str                      # "point_mass" | "rigid_body"
    mass: float
    inertia: np.ndarray | None = None        # 3x3, rigid_body only
    attach_points: list = field(default_factory=list)  # rho_k in the payload frame

    def __post_init__(self):
        if self.kind not in ("point_mass", "rigid_body"):
            raise ConfigError(f"unknown payload kind '{self.kind}'")
        if self.mass <= 0.0:
            raise ConfigError("payload mass must be > 0")
        self.attach_points = [_vec3(p, "attach point") for p in self.attach_points]
        if self.kind == "point_mass":
            if len(self.attach_points) != 1 or np.any(self.attach_points[0] != 0.0):
                raise ConfigError("a point-mass payload has exactly one attach point at the origin")
            # Placeholder inertia keeps the rigid-body code paths well posed;
            # the attitude block of a point mass never moves.
            self.inertia = np.eye(3)
        else:
            if self.inertia is None:
                raise ConfigError("rigid-body payload requires an inertia matrix")
            self.inertia = _inertia_matrix(self.inertia, "payload inertia")
            if len(self.attach_points) == 0:
                raise ConfigError("rigid-body payload requires at least one attach point")

    @property
    def rho(self) -> np.ndarray:
        return np.array(self.attach_points)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "mass": float(self.mass),
            "attach_points": [[float(v) for v in p] for p in self.attach_points],
        }
        if self.kind == "rigid_body":
            d["inertia"] = [[float(v) for v in row] for row in self.inertia]
        return d


@dataclass
class MechanismSpec:
    """Connection mechanism: per-robot cables, or rigid links forming one structure.

    For rigid links, ``wrench_maps`` defaults to the rigid-offset transform
    (robot thrust along structure z at offset r contributes torque r x f e3;
    the robot moment passes through).  Explicit 4x4 maps may override it.
    """

    kind: str                                  # "cable" | "rigid_link"
    cable_lengths: list = field(default_factory=list)
    link_offsets: list = field(default_factory=list)   # robot positions, payload frame
    wrench_maps: list | None = None                    # optional explicit 4x4 A_k

    def __post_init__(self):
        if self.kind not in ("cable", "rigid_link"):
            raise ConfigError(f"unknown mechanism kind '{self.kind}'")
        if self.kind == "cable":
            self.cable_lengths = [float(l) for l in self.cable_lengths]
            if any(l <= 0.0 for l in self.cable_lengths):
                raise ConfigError("cable lengths must be > 0")
        else:
            self.link_offsets = [_vec3(o, "link offset") for o in self.link_offsets]
            if self.wrench_maps is not None:
                maps = [np.asarray(a, dtype=float) for a in self.wrench_maps]
                if any(a.shape != (4, 4) for a in maps):
                    raise ConfigError("each wrench map must be 4x4")
                self.wrench_maps = maps

    @property
    def n_robots(self) -> int:
        return len(self.cable_lengths) if self.kind == "cable" else len(self.link_offsets)

    def to_dict(self) -> dict:
        if self.kind == "cable":
            return {"kind": "cable", "cable_lengths": [float(l) for l in self.cable_lengths]}
        d = {
            "kind": "rigid_link",
            "link_offsets": [[float(v) for v in o] for o in self.link_offsets],
        }
        if self.wrench_maps is not None:
            d["wrench_maps"] = [[[float(v) for v in row] for row in a] for a in self.wrench_maps]
        return d


GAIN_FIELDS = ("kp", "kd", "ki", "k_R", "k_Om", "k_xi", "k_w", "k_RL", "k_OmL")


@dataclass
class ControllerGains:
    """Diagonal gain matrices, stored as their 3-vector diagonals."""

    kp: np.ndarray
    kd: np.ndarray
    ki: np.ndarray
    k_R: np.ndarray      # robot attitude
    k_Om: np.ndarray     # robot angular rate
    k_xi: np.ndarray     # cable direction
    k_w: np.ndarray      # cable rate
    k_RL: np.ndarray     # payload attitude
    k_OmL: np.ndarray    # payload angular rate

    def __post_init__(self):
        for name in GAIN_FIELDS:
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape == ():
                v = np.full(3, float(v))
            if v.shape != (3,):
                raise ConfigError(f"gain {name} must be a scalar or 3-vector")
            if np.any(v < 0.0):
                raise ConfigError(f"gain {name} must be nonnegative")
            setattr(self, name, v)

    def stack(self) -> np.ndarray:
        """All gains as one flat (27,) vector in GAIN_FIELDS order."""
        return np.concatenate([getattr(self, name) for name in GAIN_FIELDS])

    def to_dict(self) -> dict:
        return {name: [float(v) for v in getattr(self, name)] for name in GAIN_FIELDS}


def default_wrench_map(offset: np.ndarray) -> np.ndarray:
    """Wrench map for a robot rigidly mounted at ``offset`` from the structure COM."""
    a = np.eye(4)
    a[1:4, 0] = np.cross(offset, np.array([0.0, 0.0, 1.0]))
    return a


@dataclass
class StructureParams:
    """Derived rigid-structure quantities for the rigid-link mechanism.

    Robots are treated as point masses plus their own (diagonal) inertia when
    composing the structure inertia about the combined center of mass.
    """

    total_mass: float
    inertia: np.ndarray            # 3x3 about the structure COM, structure frame
    member_offsets: np.ndarray     # (n+1, 3): payload first, then robots, COM-relative
    wrench_maps: list              # n 4x4 maps

    @classmethod
    def build(cls, payload: PayloadParams, robots: list[QuadrotorParams],
              mechanism: MechanismSpec) -> "StructureParams":
        if mechanism.kind != "rigid_link":
            raise ConfigError("structure parameters require a rigid_link mechanism")
        n = len(robots)
        if len(mechanism.link_offsets) != n:
            raise ConfigError(f"{n} robots but {len(mechanism.link_offsets)} link offsets")
        masses = np.array([payload.mass] + [r.mass for r in robots])
        offsets = np.vstack([np.zeros(3)] + list(mechanism.link_offsets))
        total = masses.sum()
        com = masses @ offsets / total
        rel = offsets - com
        inertia = payload.inertia.copy()
        for i, m in enumerate(masses):
            r = rel[i]
            if i > 0:
                inertia += np.diag(robots[i - 1].inertia)
            inertia += m * (np.dot(r, r) * np.eye(3) - np.outer(r, r))
        if mechanism.wrench_maps is not None:
            maps = [a.copy() for a in mechanism.wrench_maps]
        else:
            maps = [default_wrench_map(rel[i + 1]) for i in range(n)]
        return cls(total_mass=float(total), inertia=inertia,
                   member_offsets=rel, wrench_maps=maps)

    @property
    def payload_offset(self) -> np.ndarray:
        return self.member_offsets[0]

    @property
    def robot_offsets(self) -> np.ndarray:
        return self.member_offsets[1:]


def wrench_map(maps: list, u: np.ndarray) -> tuple[float, np.ndarray]:
    """Total structure wrench (f_c, M_c) = sum_k A_k [f_k; M_k].

    ``u`` is the stacked input [f_1, M_1, ..., f_n, M_n] of length 4n.
    """
    n = len(maps)
    if u.shape != (4 * n,):
        raise ConfigError(f"input vector must have length {4 * n}, got {u.shape}")
    w = np.zeros(4)
    for k in range(n):
        w += maps[k] @ u[4 * k:4 * k + 4]
    return float(w[0]), w[1:4]


def torque_of_offset_thrust(offset: np.ndarray, thrust: float) -> np.ndarray:
    """Torque about the COM of a thrust ``f e3`` applied at ``offset``."""
    return hat(offset) @ np.array([0.0, 0.0, thrust])
