"""Geometric controllers for the three system classes.

The cable controllers are thin stateful wrappers around the kernel backend:
the wrapper owns the integral accumulator and the (optional) numeric
feedforward memory, keeping the kernels pure.  The rigid-link controller is
cheap enough to stay in NumPy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import CableSystem
from .errors import ConfigError, NumericError
from .params import ControllerGains, GRAVITY, QuadrotorParams, StructureParams
from .planner import FlatOutputs
from .so3 import hat, quat_to_euler_zyx, quat_to_rot
from .state import CableStatus

_KERNEL_ERRORS = {
    -1: "controller produced a non-finite input",
    -3: "desired force vector is zero; cable direction undefined",
    -4: "degenerate cable geometry",
}


@dataclass
class ControlConfig:
    """Knobs the scenario file may override."""

    feedforward: str = "zero"      # "zero" | "numeric"
    ff_alpha: float = 0.5          # first-order filter coefficient
    integral_limit: float = 2.0    # elementwise clamp on the position integral


def attitude_error(r: np.ndarray, r_des: np.ndarray) -> np.ndarray:
    """0.5 (R^T R_des - R_des^T R) vee; zero iff R == R_des, sign flips on swap."""
    m = r.T @ r_des - r_des.T @ r
    return 0.5 * np.array([m[2, 1], m[0, 2], m[1, 0]])


def pinv_p_matrix(rho: np.ndarray) -> np.ndarray:
    """P^T (P P^T)^-1 for P = [I ... I; rho_hat_1 ... rho_hat_n].

    Raises when P P^T is singular (e.g. collinear attach points), naming the
    achieved rank.
    """
    n = rho.shape[0]
    p = np.zeros((6, 3 * n))
    for k in range(n):
        p[0:3, 3 * k:3 * k + 3] = np.eye(3)
        p[3:6, 3 * k:3 * k + 3] = hat(rho[k])
    ppt = p @ p.T
    rank = np.linalg.matrix_rank(ppt)
    if rank < 6:
        raise NumericError(
            f"tension distribution is singular: P P^T has rank {rank} < 6 "
            "(attach points degenerate)")
    return p.T @ np.linalg.inv(ppt)


def tension_distribution(f_des: np.ndarray, m_des: np.ndarray, r_l: np.ndarray,
                         rho: np.ndarray) -> np.ndarray:
    """Distribute a desired payload wrench into per-cable tension vectors.

    Exact by construction: sum mu_k = F_des and sum rho_hat_k R_L^T mu_k = M_des.
    """
    pinv = pinv_p_matrix(np.asarray(rho, dtype=float))
    wrench = np.concatenate([r_l.T @ f_des, m_des])
    mu = (pinv @ wrench).reshape(-1, 3) @ r_l.T
    return mu


def saturate(u: np.ndarray, robots: list[QuadrotorParams]):
    """Clamp thrusts to [0, f_max] and moment norms to m_max per robot."""
    out = u.copy()
    clamped = np.zeros(len(robots), dtype=bool)
    for k, quad in enumerate(robots):
        f = out[4 * k]
        if f < 0.0:
            out[4 * k] = 0.0
            clamped[k] = True
        elif f > quad.max_thrust:
            out[4 * k] = quad.max_thrust
            clamped[k] = True
        m = out[4 * k + 1:4 * k + 4]
        nm = np.linalg.norm(m)
        if nm > quad.max_moment:
            out[4 * k + 1:4 * k + 4] = m * (quad.max_moment / nm)
            clamped[k] = True
    return out, clamped


class _FeedforwardMemory:
    """Filtered numeric differentiation of the desired cable directions."""

    def __init__(self, n: int, alpha: float):
        self.n = n
        self.alpha = alpha
        self.reset()

    def reset(self):
        self.prev_xi_des = None
        self.xi_rate = np.zeros((self.n, 3))
        self.omega_des = np.zeros((self.n, 3))
        self.omega_rate = np.zeros((self.n, 3))

    def update(self, xi_des: np.ndarray, dt: float):
        if self.prev_xi_des is None:
            self.prev_xi_des = xi_des.copy()
            return
        raw = (xi_des - self.prev_xi_des) / dt
        self.xi_rate += self.alpha * (raw - self.xi_rate)
        omega_new = np.cross(xi_des, self.xi_rate)
        raw_acc = (omega_new - self.omega_des) / dt
        self.omega_rate += self.alpha * (raw_acc - self.omega_rate)
        self.omega_des = omega_new
        self.prev_xi_des = xi_des.copy()


class CableController:
    """Shared machinery of the single- and multi-cable controllers."""

    def __init__(self, sys: CableSystem, gains: ControllerGains, dt: float,
                 config: ControlConfig | None = None):
        self.sys = sys
        self.gains = gains.stack()
        self.dt = dt
        self.config = config or ControlConfig()
        if self.config.feedforward not in ("zero", "numeric"):
            raise ConfigError("feedforward mode must be 'zero' or 'numeric'")
        n = sys.n_robots
        self.integral = np.zeros(3)
        self.ff = _FeedforwardMemory(n, self.config.ff_alpha)
        self._prev_taut = None
        pinv = None if sys.is_single else pinv_p_matrix(sys.rho)
        self.param_buf = sys.kernels.pack_control_params(
            sys.payload.mass, sys.payload.inertia, sys.masses, sys.inertias,
            np.asarray(sys.lengths, dtype=float), sys.rho, pinv)
        self._u = np.zeros(4 * n)
        self._xi_des = np.zeros((n, 3))

    def reset(self):
        self.integral[:] = 0.0
        self.ff.reset()
        self._prev_taut = None

    def compute(self, x: np.ndarray, status: CableStatus, des: FlatOutputs) -> np.ndarray:
        taut = np.ascontiguousarray(status.taut, dtype=np.uint8)
        if self._prev_taut is not None and not np.array_equal(taut, self._prev_taut):
            # mode switch: anti-windup reset, stale feedforward dropped
            self.integral[:] = 0.0
            self.ff.reset()
        self._prev_taut = taut.copy()

        e_x = des.position - x[0:3]
        self.integral += e_x * self.dt
        lim = self.config.integral_limit
        np.clip(self.integral, -lim, lim, out=self.integral)

        yaw = np.full(self.sys.n_robots, des.yaw)
        kern = self.sys.kernels
        fn = kern.single_cable_control if self.sys.is_single else kern.multi_cable_control
        st = fn(self._u, self._xi_des, x, taut, des.des22(), yaw, self.integral,
                self.ff.omega_des if self.config.feedforward == "numeric"
                else np.zeros((self.sys.n_robots, 3)),
                self.ff.omega_rate if self.config.feedforward == "numeric"
                else np.zeros((self.sys.n_robots, 3)),
                self.gains, self.param_buf)
        if st != 0:
            raise NumericError(_KERNEL_ERRORS.get(st, f"control kernel failed ({st})"))
        if self.config.feedforward == "numeric":
            self.ff.update(self._xi_des, self.dt)
        # saturation is the simulation loop's job (clamp + log flag)
        return self._u.copy()


class SingleCableController(CableController):
    def __init__(self, sys: CableSystem, gains: ControllerGains, dt: float,
                 config: ControlConfig | None = None):
        if not sys.is_single:
            raise ConfigError("SingleCableController requires a point-mass system")
        super().__init__(sys, gains, dt, config)


class MultiCableController(CableController):
    def __init__(self, sys: CableSystem, gains: ControllerGains, dt: float,
                 config: ControlConfig | None = None):
        if sys.is_single:
            raise ConfigError("MultiCableController requires a rigid-body payload")
        super().__init__(sys, gains, dt, config)


def single_cable_control(x, status, des: FlatOutputs, sys: CableSystem,
                         gains: ControllerGains, integral=None):
    """One-shot functional form of the single-cable law (no memory)."""
    ctl = SingleCableController(sys, gains, dt=0.0)
    if integral is not None:
        ctl.integral = np.asarray(integral, dtype=float)
        ctl.config.integral_limit = float(np.abs(ctl.integral).max() or 1.0) + 1.0
    u = ctl.compute(x, status, des)
    return float(u[0]), u[1:4]


def multi_cable_control(x, status, des: FlatOutputs, sys: CableSystem,
                        gains: ControllerGains, integral=None):
    """One-shot functional form of the multi-cable law (no memory)."""
    ctl = MultiCableController(sys, gains, dt=0.0)
    if integral is not None:
        ctl.integral = np.asarray(integral, dtype=float)
        ctl.config.integral_limit = float(np.abs(ctl.integral).max() or 1.0) + 1.0
    return ctl.compute(x, status, des)


def rigid_link_control(x: np.ndarray, pos_des, vel_des, acc_des, q_des,
                       om_des, dom_des, gains: ControllerGains,
                       structure: StructureParams):
    """Structure-level wrench law: thrust from position errors, moment from
    geometric attitude errors about the desired yaw/thrust direction."""
    g = np.array([0.0, 0.0, GRAVITY])
    e_x = np.asarray(pos_des, dtype=float) - x[0:3]
    e_v = np.asarray(vel_des, dtype=float) - x[3:6]
    f_vec = structure.total_mass * (gains.kp * e_x + gains.kd * e_v + acc_des + g)
    r = quat_to_rot(x[6:10])
    f_c = float(f_vec @ r[:, 2])
    nf = np.linalg.norm(f_vec)
    if nf < 1e-12:
        raise NumericError("rigid-link controller: zero desired force")
    b3 = f_vec / nf
    yaw = quat_to_euler_zyx(np.asarray(q_des, dtype=float))[2]
    b1c = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    b2 = np.cross(b3, b1c)
    nb2 = np.linalg.norm(b2)
    if nb2 < 1e-9:
        b1c = np.array([0.0, 1.0, 0.0])
        b2 = np.cross(b3, b1c)
        nb2 = np.linalg.norm(b2)
    b2 /= nb2
    r_des = np.column_stack([np.cross(b2, b3), b2, b3])
    t1 = r.T @ (r_des @ np.asarray(om_des, dtype=float))
    e_r = attitude_error(r, r_des)
    e_om = t1 - x[10:13]
    j_c = structure.inertia
    m_c = gains.k_RL * e_r + gains.k_OmL * e_om \
        + j_c @ (r.T @ (r_des @ np.asarray(dom_des, dtype=float))) \
        + np.cross(t1, j_c @ t1)
    return f_c, m_c


def allocation_matrix(structure: StructureParams) -> np.ndarray:
    """Minimum-norm right inverse of the stacked wrench map."""
    a = np.hstack(structure.wrench_maps)
    rank = np.linalg.matrix_rank(a)
    if rank < 4:
        raise NumericError(f"wrench allocation is rank deficient (rank {rank} < 4)")
    return a.T @ np.linalg.inv(a @ a.T)


def allocate(f_c: float, m_c: np.ndarray, structure: StructureParams,
             robots: list[QuadrotorParams]):
    """Split a structure wrench into per-robot inputs, then clamp to limits."""
    pinv = allocation_matrix(structure)
    u = pinv @ np.concatenate([[f_c], m_c])
    return saturate(u, robots)


class RigidLinkController:
    """Tracks a desired payload trajectory with the combined structure."""

    def __init__(self, structure: StructureParams, robots: list[QuadrotorParams],
                 gains: ControllerGains):
        self.structure = structure
        self.robots = robots
        self.gains = gains
        self.pinv = allocation_matrix(structure)

    def reset(self):
        pass

    def compute(self, x: np.ndarray, status, des: FlatOutputs) -> np.ndarray:
        # target the COM: payload offset mapped through the desired yaw only,
        # so the position loop stays decoupled from the commanded tilt
        yaw = quat_to_euler_zyx(des.quaternion)[2]
        cy, sy = np.cos(yaw), np.sin(yaw)
        r_yaw = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
        offset = r_yaw @ self.structure.payload_offset
        pos_des = des.position - offset
        vel_des = des.velocity
        f_c, m_c = rigid_link_control(
            x, pos_des, vel_des, des.acceleration, des.quaternion,
            des.omega, des.omega_dot, self.gains, self.structure)
        return self.pinv @ np.concatenate([[f_c], m_c])
