"""Desired payload trajectories: circle, minimum-kth-derivative splines,
periodic attitude profiles.

Splines are piecewise polynomials in *local* segment time (tau = t - t_i),
which keeps the normal equations well conditioned for long horizons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError
from .so3 import quat_exp_tangent

TWO_PI = 2.0 * math.pi

_AXES = {"roll": np.array([1.0, 0.0, 0.0]),
         "pitch": np.array([0.0, 1.0, 0.0]),
         "yaw": np.array([0.0, 0.0, 1.0])}


@dataclass
class FlatOutputs:
    """Desired payload references consumed by the controllers."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))
    jerk: np.ndarray = field(default_factory=lambda: np.zeros(3))
    snap: np.ndarray = field(default_factory=lambda: np.zeros(3))
    quaternion: np.ndarray = field(default_factory=lambda: np.array([1.0, 0, 0, 0]))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega_dot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    yaw_rate: float = 0.0

    def des22(self) -> np.ndarray:
        """Pack for the control kernels: pos, vel, acc, quat, omega, omega_dot."""
        return np.concatenate([self.position, self.velocity, self.acceleration,
                               self.quaternion, self.omega, self.omega_dot])


def circle_traj(t: float, radius: float, period: float, height: float) -> FlatOutputs:
    """Horizontal circle at constant angular rate, analytic through 4th order."""
    if period <= 0.0:
        raise ConfigError("circle period must be > 0")
    w = TWO_PI / period
    c, s = math.cos(w * t), math.sin(w * t)
    r = radius
    return FlatOutputs(
        position=np.array([r * c, r * s, height]),
        velocity=np.array([-r * w * s, r * w * c, 0.0]),
        acceleration=np.array([-r * w * w * c, -r * w * w * s, 0.0]),
        jerk=np.array([r * w ** 3 * s, -r * w ** 3 * c, 0.0]),
        snap=np.array([r * w ** 4 * c, r * w ** 4 * s, 0.0]),
    )


@dataclass
class AttitudeProfile:
    """Sinusoidal rotation about one body axis: angle = A sin(2 pi t / T)."""

    axis: str
    amplitude: float
    period: float

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ConfigError(f"attitude axis must be one of {sorted(_AXES)}")
        if self.period <= 0.0:
            raise ConfigError("attitude period must be > 0")


def attitude_traj(t: float, profile: AttitudeProfile):
    """Desired attitude quaternion plus consistent body rates.

    Rotation about a fixed body axis, so omega = angle_rate * axis exactly.
    """
    n = _AXES[profile.axis]
    w = TWO_PI / profile.period
    angle = profile.amplitude * math.sin(w * t)
    rate = profile.amplitude * w * math.cos(w * t)
    acc = -profile.amplitude * w * w * math.sin(w * t)
    q = quat_exp_tangent(angle * n)
    return q, rate * n, acc * n


@dataclass
class PolySpline:
    """Piecewise polynomial in local time, one coefficient row per segment/axis."""

    times: np.ndarray          # knots t_0..t_m, strictly increasing
    coeffs: np.ndarray         # (segments, 3, N+1), ascending powers of tau
    order: int                 # polynomial order N
    k: int                     # derivative order that was minimized
    cost: float                # QP objective sum over axes

    @property
    def n_segments(self) -> int:
        return len(self.times) - 1

    def to_dict(self) -> dict:
        return {
            "k": int(self.k),
            "order": int(self.order),
            "cost": float(self.cost),
            "times": [float(t) for t in self.times],
            "segments": [
                {"t_start": float(self.times[i]), "t_end": float(self.times[i + 1]),
                 "coeffs": [[float(c) for c in self.coeffs[i, d]] for d in range(3)]}
                for i in range(self.n_segments)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolySpline":
        times = np.asarray(d["times"], dtype=float)
        segs = d["segments"]
        coeffs = np.array([[seg["coeffs"][ax] for ax in range(3)] for seg in segs])
        return cls(times=times, coeffs=coeffs, order=int(d["order"]), k=int(d["k"]),
                   cost=float(d.get("cost", 0.0)))


def _deriv_row(n_coeffs: int, order: int, tau: float) -> np.ndarray:
    """Row of d^order/dtau^order [1, tau, tau^2, ...] evaluated at tau."""
    row = np.zeros(n_coeffs)
    for n in range(order, n_coeffs):
        fac = 1.0
        for j in range(n, n - order, -1):
            fac *= j
        row[n] = fac * tau ** (n - order)
    return row


def _cost_block(n_coeffs: int, k: int, duration: float) -> np.ndarray:
    q = np.zeros((n_coeffs, n_coeffs))
    for i in range(k, n_coeffs):
        fi = 1.0
        for j in range(i, i - k, -1):
            fi *= j
        for j2 in range(k, n_coeffs):
            fj = 1.0
            for j in range(j2, j2 - k, -1):
                fj *= j
            p = i + j2 - 2 * k + 1
            q[i, j2] = fi * fj * duration ** p / p
    return q


def solve_min_deriv(waypoints, times, k: int = 4, order: int | None = None,
                    boundary_derivs=None) -> PolySpline:
    """Minimum-kth-derivative piecewise polynomial through waypoints.

    Minimizes the time integral of |d^k x / dt^k|^2 subject to exact waypoint
    interpolation, C^{k-1} continuity at interior knots, and zero boundary
    derivatives 1..k-1 (rest-to-rest) unless ``boundary_derivs`` provides
    (start, end) arrays of shape (k-1, 3).
    """
    waypoints = np.asarray(waypoints, dtype=float)
    times = np.asarray(times, dtype=float)
    if waypoints.ndim != 2 or waypoints.shape[1] != 3:
        raise ConfigError("waypoints must be an (m+1, 3) array")
    if times.shape != (waypoints.shape[0],):
        raise ConfigError("one knot time per waypoint is required")
    if np.any(np.diff(times) <= 0.0):
        raise ConfigError("knot times must be strictly increasing")
    m = len(times) - 1
    if m < 1:
        raise ConfigError("at least one segment (two waypoints) is required")
    if k < 1:
        raise ConfigError("derivative order k must be >= 1")
    if order is None:
        order = 2 * k - 1
    nc = order + 1
    if order < 2 * k - 1:
        raise ConfigError(
            f"polynomial order {order} cannot satisfy the constraint count; need >= {2 * k - 1}")

    if boundary_derivs is None:
        start_d = np.zeros((k - 1, 3))
        end_d = np.zeros((k - 1, 3))
    else:
        start_d = np.asarray(boundary_derivs[0], dtype=float)
        end_d = np.asarray(boundary_derivs[1], dtype=float)
        if start_d.shape != (k - 1, 3) or end_d.shape != (k - 1, 3):
            raise ConfigError(f"boundary derivatives must be ({k - 1}, 3) arrays")

    nv = m * nc
    durations = np.diff(times)
    big_q = np.zeros((nv, nv))
    for i in range(m):
        big_q[i * nc:(i + 1) * nc, i * nc:(i + 1) * nc] = _cost_block(nc, k, durations[i])

    rows = []
    rhs_rows = []    # (3,) per constraint row

    def add(row_seg, seg, value3):
        row = np.zeros(nv)
        row[seg * nc:(seg + 1) * nc] = row_seg
        rows.append(row)
        rhs_rows.append(np.asarray(value3, dtype=float))

    for i in range(m):
        add(_deriv_row(nc, 0, 0.0), i, waypoints[i])
        add(_deriv_row(nc, 0, durations[i]), i, waypoints[i + 1])
    for d in range(1, k):
        add(_deriv_row(nc, d, 0.0), 0, start_d[d - 1])
        add(_deriv_row(nc, d, durations[-1]), m - 1, end_d[d - 1])
    for j in range(1, m):          # interior knot between segments j-1 and j
        for d in range(1, k):
            row = np.zeros(nv)
            row[(j - 1) * nc:j * nc] = _deriv_row(nc, d, durations[j - 1])
            row[j * nc:(j + 1) * nc] = -_deriv_row(nc, d, 0.0)
            rows.append(row)
            rhs_rows.append(np.zeros(3))

    a = np.vstack(rows)
    n_con = a.shape[0]
    if n_con > nv:
        raise ConfigError(
            f"{n_con} constraints exceed the {nv} free coefficients; increase the order")
    kkt = np.zeros((nv + n_con, nv + n_con))
    kkt[0:nv, 0:nv] = 2.0 * big_q
    kkt[0:nv, nv:] = a.T
    kkt[nv:, 0:nv] = a
    rhs = np.zeros((nv + n_con, 3))
    rhs[nv:, :] = np.array(rhs_rows)
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"spline normal equations are singular "
            f"(condition number {np.linalg.cond(kkt):.3e})") from exc
    coeffs_flat = sol[0:nv, :]
    residual = np.abs(kkt @ sol - rhs).max()
    if residual > 1e-8:
        raise NumericError(
            f"spline KKT residual {residual:.3e} exceeds 1e-8 "
            f"(condition number {np.linalg.cond(kkt):.3e})")

    coeffs = np.transpose(coeffs_flat.reshape(m, nc, 3), (0, 2, 1))
    cost = 0.0
    for ax in range(3):
        c = coeffs_flat[:, ax]
        cost += float(c @ big_q @ c)
    return PolySpline(times=times.copy(), coeffs=coeffs, order=order, k=k, cost=cost)


def eval_spline(spline: PolySpline, t: float) -> FlatOutputs:
    """Evaluate position and derivatives; holds the final waypoint after t_m."""
    times = spline.times
    if t < times[0]:
        raise NumericError(f"evaluation time {t} precedes the spline start {times[0]}")
    if t >= times[-1]:
        last = spline.coeffs[-1]
        tau = times[-1] - times[-2]
        pos = np.array([last[ax] @ _deriv_row(spline.order + 1, 0, tau)
                        for ax in range(3)])
        return FlatOutputs(position=pos)
    seg = int(np.searchsorted(times, t, side="right") - 1)
    tau = t - times[seg]
    c = spline.coeffs[seg]
    vals = []
    for d in range(0, 5):
        row = _deriv_row(spline.order + 1, d, tau)
        vals.append(np.array([c[ax] @ row for ax in range(3)]))
    return FlatOutputs(position=vals[0], velocity=vals[1], acceleration=vals[2],
                       jerk=vals[3], snap=vals[4])


def spline_cost_by_quadrature(spline: PolySpline, points_per_segment: int = 64) -> float:
    """Recompute the k-th derivative cost with Gauss-Legendre quadrature."""
    nodes, weights = np.polynomial.legendre.leggauss(points_per_segment)
    total = 0.0
    nc = spline.order + 1
    for i in range(spline.n_segments):
        t0, t1 = spline.times[i], spline.times[i + 1]
        half = 0.5 * (t1 - t0)
        for node, wgt in zip(nodes, weights):
            tau = half * (node + 1.0)
            row = _deriv_row(nc, spline.k, tau)
            v = spline.coeffs[i] @ row
            total += wgt * half * float(v @ v)
    return total


# --------------------------------------------------------------------------
# plan objects consumed by the simulation loop
# --------------------------------------------------------------------------

class HoverPlan:
    def __init__(self, position, attitude_profile: AttitudeProfile | None = None):
        self.position = np.asarray(position, dtype=float)
        self.attitude_profile = attitude_profile

    def sample(self, t: float) -> FlatOutputs:
        out = FlatOutputs(position=self.position.copy())
        return _with_attitude(out, self.attitude_profile, t)


class CirclePlan:
    def __init__(self, radius, period, height,
                 attitude_profile: AttitudeProfile | None = None):
        if period <= 0.0:
            raise ConfigError("circle period must be > 0")
        self.radius, self.period, self.height = radius, period, height
        self.attitude_profile = attitude_profile

    def sample(self, t: float) -> FlatOutputs:
        out = circle_traj(t, self.radius, self.period, self.height)
        return _with_attitude(out, self.attitude_profile, t)


class SplinePlan:
    def __init__(self, spline: PolySpline,
                 attitude_profile: AttitudeProfile | None = None):
        self.spline = spline
        self.attitude_profile = attitude_profile

    def sample(self, t: float) -> FlatOutputs:
        out = eval_spline(self.spline, max(t, self.spline.times[0]))
        return _with_attitude(out, self.attitude_profile, t)


def _with_attitude(out: FlatOutputs, profile: AttitudeProfile | None, t: float):
    if profile is not None:
        q, om, omd = attitude_traj(t, profile)
        out.quaternion, out.omega, out.omega_dot = q, om, omd
        if profile.axis == "yaw":
            angle = profile.amplitude * math.sin(TWO_PI * t / profile.period)
            out.yaw = angle
            out.yaw_rate = om[2]
    return out
