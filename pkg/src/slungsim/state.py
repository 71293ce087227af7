"""System state containers and the flat state-vector layout.

Cable systems use one uniform layout regardless of payload kind:

    [x_L(3), v_L(3), q_L(4, w-first), Om_L(3)]  then per robot k
    [x_k(3), v_k(3), q_k(4), Om_k(3)]           at offset 13 + 13k

A point-mass payload simply carries a frozen identity attitude block.  The
rigid-link mechanism simulates a single 13-entry structure state with the
same block ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .so3 import quat_to_rot

PAYLOAD_DIM = 13
ROBOT_DIM = 13

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def robot_slice(k: int) -> slice:
    base = PAYLOAD_DIM + ROBOT_DIM * k
    return slice(base, base + ROBOT_DIM)


def state_dim(n_robots: int) -> int:
    return PAYLOAD_DIM + ROBOT_DIM * n_robots


def quat_offsets(n_robots: int) -> list[int]:
    """Start indices of every quaternion block in the flat cable-system state."""
    return [6] + [PAYLOAD_DIM + ROBOT_DIM * k + 6 for k in range(n_robots)]


@dataclass
class RigidBodyState:
    position: np.ndarray
    velocity: np.ndarray
    quaternion: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        self.quaternion = np.asarray(self.quaternion, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        for name, want in (("position", 3), ("velocity", 3), ("quaternion", 4), ("omega", 3)):
            v = getattr(self, name)
            if v.shape != (want,):
                raise ConfigError(f"{name} must have {want} components")
            if not np.all(np.isfinite(v)):
                raise ConfigError(f"{name} must be finite")
        norm = np.linalg.norm(self.quaternion)
        if abs(norm - 1.0) > 1e-9:
            raise ConfigError(f"quaternion norm {norm} is not 1 within 1e-9")
        self.quaternion = self.quaternion / norm

    def flat(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity, self.quaternion, self.omega])

    @classmethod
    def from_flat(cls, x: np.ndarray) -> "RigidBodyState":
        return cls(position=x[0:3].copy(), velocity=x[3:6].copy(),
                   quaternion=x[6:10].copy(), omega=x[10:13].copy())

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_rot(self.quaternion)


# A rigid-link structure is a single rigid body.
StructureState = RigidBodyState


@dataclass
class SystemState:
    """Payload pose/twist plus per-robot pose/twist."""

    payload: RigidBodyState
    robots: list[RigidBodyState]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.payload.flat()] + [r.flat() for r in self.robots])

    @classmethod
    def from_flat(cls, x: np.ndarray, n_robots: int) -> "SystemState":
        if x.shape != (state_dim(n_robots),):
            raise ConfigError(f"state vector must have length {state_dim(n_robots)}")
        payload = RigidBodyState.from_flat(x[0:PAYLOAD_DIM])
        robots = [RigidBodyState.from_flat(x[robot_slice(k)]) for k in range(n_robots)]
        return cls(payload=payload, robots=robots)

    @property
    def n_robots(self) -> int:
        return len(self.robots)

    def attach_points(self, rho: np.ndarray) -> np.ndarray:
        """World positions p_k = x_L + R_L rho_k, shape (n, 3)."""
        return self.payload.position + (self.payload.rotation @ rho.T).T


@dataclass
class CableStatus:
    """Per-cable taut/slack flags with the derived index sets."""

    taut: np.ndarray   # bool, shape (n,)

    def __post_init__(self):
        self.taut = np.asarray(self.taut, dtype=bool)

    @property
    def taut_set(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.taut)]

    @property
    def slack_set(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(~self.taut)]

    @property
    def n_taut(self) -> int:
        return int(self.taut.sum())

    def copy(self) -> "CableStatus":
        return CableStatus(self.taut.copy())
