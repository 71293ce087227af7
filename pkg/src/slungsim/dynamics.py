"""Continuous-time equations of motion for the three system classes.

Every function maps (flat state, input, parameters) to a flat state
derivative; none of them mutates its inputs.  The heavy lifting happens in
the kernel backend (see :mod:`slungsim.backend`); these wrappers add
validation and error reporting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ConfigError, NumericError
from .params import PayloadParams, QuadrotorParams, StructureParams, wrench_map
from .so3 import quat_to_rot
from .state import CableStatus, state_dim

# Sanity bound on |d_k - l_k| for declared-taut cables; the integrator's
# drift monitor keeps closed-loop residuals far below this.
CONSTRAINT_TOL = 1e-3


@dataclass
class CableSystem:
    """A payload plus n robots on cables, packed for the kernel backend."""

    payload: PayloadParams
    robots: list[QuadrotorParams]
    lengths: list[float]
    kernels: object = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.robots)
        if n == 0:
            raise ConfigError("cable system needs at least one robot")
        if len(self.lengths) != n:
            raise ConfigError(f"{n} robots but {len(self.lengths)} cable lengths")
        if len(self.payload.attach_points) != n:
            raise ConfigError(
                f"{n} robots but {len(self.payload.attach_points)} attach points")
        if self.payload.kind == "point_mass" and n != 1:
            raise ConfigError("a point-mass payload supports exactly one robot")
        if self.kernels is None:
            self.kernels = backend.kernels
        self.masses = np.array([r.mass for r in self.robots])
        self.inertias = np.array([r.inertia for r in self.robots])
        self.rho = self.payload.rho
        self.param_buf = self.kernels.pack_cable_params(
            self.payload.mass, self.payload.inertia, self.masses,
            self.inertias, np.asarray(self.lengths, dtype=float), self.rho)

    @property
    def n_robots(self) -> int:
        return len(self.robots)

    @property
    def is_single(self) -> bool:
        return self.payload.kind == "point_mass"

    @property
    def dim(self) -> int:
        return state_dim(self.n_robots)

    def attach_points(self, x: np.ndarray) -> np.ndarray:
        r_l = quat_to_rot(x[6:10])
        return x[0:3] + (r_l @ self.rho.T).T

    def attach_velocities(self, x: np.ndarray) -> np.ndarray:
        r_l = quat_to_rot(x[6:10])
        return x[3:6] + (r_l @ np.cross(x[10:13], self.rho).T).T


def _run_kernel(status: int, what: str, a66=None):
    if status == 0:
        return
    if status == backend.kernels.ERR_SINGULAR or status == -2:
        cond = np.linalg.cond(a66) if a66 is not None else float("inf")
        raise NumericError(f"{what}: singular payload system (condition number {cond:.3e})")
    if status == -4:
        raise NumericError(f"{what}: degenerate cable geometry (robot at attach point)")
    raise NumericError(f"{what}: kernel failed with status {status}")


def _check_taut_geometry(sys: CableSystem, x: np.ndarray, taut: np.ndarray,
                         tol: float) -> None:
    p = sys.attach_points(x)
    for k in np.flatnonzero(taut):
        d = np.linalg.norm(x[13 + 13 * k:16 + 13 * k] - p[k])
        if abs(d - sys.lengths[k]) > tol:
            raise NumericError(
                f"cable {k} declared taut but |d - l| = {abs(d - sys.lengths[k]):.3e} "
                f"exceeds {tol:.1e}; run the hybrid guard first")


def single_taut_deriv(x: np.ndarray, u: np.ndarray, sys: CableSystem,
                      tol: float = CONSTRAINT_TOL) -> np.ndarray:
    """Derivative of the taut single-cable system (payload + one robot)."""
    if not sys.is_single:
        raise ConfigError("single_taut_deriv requires a point-mass single-robot system")
    _check_taut_geometry(sys, x, np.array([True]), tol)
    out = np.empty(26)
    _run_kernel(sys.kernels.single_taut_deriv(out, x, u, sys.param_buf), "single_taut_deriv")
    return out


def single_slack_deriv(x: np.ndarray, u: np.ndarray, sys: CableSystem) -> np.ndarray:
    """Derivative when the cable is slack: two independent bodies."""
    if not sys.is_single:
        raise ConfigError("single_slack_deriv requires a point-mass single-robot system")
    out = np.empty(26)
    _run_kernel(sys.kernels.single_slack_deriv(out, x, u, sys.param_buf), "single_slack_deriv")
    return out


def multi_cable_deriv(x: np.ndarray, u: np.ndarray, sys: CableSystem,
                      status: CableStatus, tol: float = CONSTRAINT_TOL) -> np.ndarray:
    """Derivative of the n-cable system for a given taut/slack status."""
    taut = np.ascontiguousarray(status.taut, dtype=np.uint8)
    _check_taut_geometry(sys, x, status.taut, tol)
    out = np.empty(sys.dim)
    st = sys.kernels.multi_cable_deriv(out, x, u, taut, sys.param_buf)
    if st == -2:
        a66 = _assemble_payload_system(x, sys, status)
        _run_kernel(st, "multi_cable_deriv", a66)
    _run_kernel(st, "multi_cable_deriv")
    return out


def _assemble_payload_system(x, sys, status):
    """6x6 payload mass/inertia operator (for condition reporting only)."""
    r_l = quat_to_rot(x[6:10])
    a66 = np.zeros((6, 6))
    a66[0:3, 0:3] = sys.payload.mass * np.eye(3)
    a66[3:6, 3:6] = sys.payload.inertia
    p = sys.attach_points(x)
    for k in status.taut_set:
        delta = p[k] - x[13 + 13 * k:16 + 13 * k]
        xi = delta / np.linalg.norm(delta)
        g = np.cross(sys.rho[k], r_l.T @ xi)
        m = sys.masses[k]
        a66[0:3, 0:3] += m * np.outer(xi, xi)
        a66[0:3, 3:6] += m * np.outer(xi, g)
        a66[3:6, 0:3] += m * np.outer(g, xi)
        a66[3:6, 3:6] += m * np.outer(g, g)
    return a66


def rigid_structure_deriv(x: np.ndarray, u: np.ndarray,
                          structure: StructureParams) -> np.ndarray:
    """Derivative of the combined rigid structure under the robots' inputs."""
    fc, mc = wrench_map(structure.wrench_maps, u)
    out = np.empty(13)
    st = backend.kernels.rigid_structure_deriv(
        out, x, fc, mc, structure.total_mass, structure.inertia,
        np.linalg.inv(structure.inertia))
    _run_kernel(st, "rigid_structure_deriv")
    return out


def structure_to_members(x: np.ndarray, structure: StructureParams) -> np.ndarray:
    """Expand a structure state into payload + robot states (flat, 13 + 13n).

    All members share the structure attitude and angular velocity; positions
    and velocities follow rigid-body kinematics about the COM.
    """
    n = len(structure.robot_offsets)
    r = quat_to_rot(x[6:10])
    omega = x[10:13]
    out = np.empty(state_dim(n))
    for i, off in enumerate(structure.member_offsets):
        base = 13 * i
        out[base:base + 3] = x[0:3] + r @ off
        out[base + 3:base + 6] = x[3:6] + r @ np.cross(omega, off)
        out[base + 6:base + 10] = x[6:10]
        out[base + 10:base + 13] = omega
    return out
