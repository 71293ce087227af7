"""Fixed-step RK4 propagation with guard-event localization, quaternion
renormalization, feedback-noise injection, and the simulation loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import hybrid
from .control import saturate
from .dynamics import rigid_structure_deriv, structure_to_members
from .errors import ConfigError, NumericError, SimulationAbort
from .logio import build_row, log_columns
from .scenario import (
    NoiseSpec,
    ScenarioSpec,
    build_cable_system,
    build_controller,
    build_structure,
    initial_cable_state,
    initial_cable_status,
    initial_structure_state,
)
from .so3 import quat_boxplus
from .state import CableStatus, quat_offsets

logger = logging.getLogger(__name__)

EVENT_TIME_TOL = 1e-9        # bisection window for guard crossings, seconds
RENORM_WARN = 1e-6           # quaternion drift worth reporting
REPROJECT_EVERY = 1000       # steps between constraint-drift corrections
REPROJECT_TOL = 1e-6         # |d - l| that triggers reprojection
MAX_RESET_CASCADE = 32


def rk4_step(deriv, x, u, dt, quat_starts=()):
    """Classical 4-stage Runge-Kutta step of ``xdot = deriv(x, u)``.

    Quaternion blocks starting at the given offsets are renormalized after
    the step; a drift larger than ``RENORM_WARN`` is logged.  Non-finite
    derivatives raise, naming the offending state indices.
    """
    if dt <= 0.0:
        raise ConfigError("rk4 step size must be > 0")
    k1 = _checked(deriv(x, u))
    k2 = _checked(deriv(x + (0.5 * dt) * k1, u))
    k3 = _checked(deriv(x + (0.5 * dt) * k2, u))
    k4 = _checked(deriv(x + dt * k3, u))
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    for off in quat_starts:
        q = out[off:off + 4]
        norm = np.sqrt(q @ q)
        delta = abs(norm - 1.0)
        if delta > RENORM_WARN:
            logger.warning("quaternion at offset %d drifted by %.3e", off, delta)
        out[off:off + 4] = q / norm
    return out


def _checked(xdot):
    if not np.all(np.isfinite(xdot)):
        bad = np.flatnonzero(~np.isfinite(xdot))
        raise NumericError(f"non-finite derivative in state block {bad.tolist()}")
    return xdot


def locate_event(deriv, x, u, dt, guard, tol_t=EVENT_TIME_TOL, quat_starts=()):
    """Bisect a guard sign change inside one RK4 step.

    ``guard`` maps a state to a scalar; its sign must differ between ``x``
    and the full step.  Returns ``(t_event, state)`` with the state taken on
    the post-crossing side of the bisection window.
    """
    g0 = guard(x)
    x_full = rk4_step(deriv, x, u, dt, quat_starts)
    g1 = guard(x_full)
    if (g0 < 0.0) == (g1 < 0.0):
        raise NumericError("guard does not change sign across the step")
    lo, hi = 0.0, dt
    x_hi = x_full
    while hi - lo > tol_t:
        mid = 0.5 * (lo + hi)
        x_mid = rk4_step(deriv, x, u, mid, quat_starts)
        if (guard(x_mid) < 0.0) == (g0 < 0.0):
            lo = mid
        else:
            hi = mid
            x_hi = x_mid
    return hi, x_hi


def inject_noise(x, noise: NoiseSpec, rng, n_robots: int, point_mass: bool,
                 structure: bool = False):
    """Feedback noise: additive on vector blocks, boxplus on quaternions.

    Draw order (fixed for reproducibility): payload position, velocity,
    [quaternion tangent, angular velocity for rigid payloads], then the same
    four blocks per robot.  Zero-sigma blocks draw nothing.
    """
    if not noise.enabled:
        return x
    out = x.copy()

    def perturb_body(base, with_attitude=True):
        if noise.position > 0.0:
            out[base:base + 3] += noise.position * rng.standard_normal(3)
        if noise.velocity > 0.0:
            out[base + 3:base + 6] += noise.velocity * rng.standard_normal(3)
        if with_attitude:
            if noise.quat_tangent > 0.0:
                sigma = noise.quat_tangent * rng.standard_normal(3)
                out[base + 6:base + 10] = quat_boxplus(out[base + 6:base + 10], sigma)
            if noise.angular_velocity > 0.0:
                out[base + 10:base + 13] += noise.angular_velocity * rng.standard_normal(3)

    perturb_body(0, with_attitude=structure or not point_mass)
    if not structure:
        for k in range(n_robots):
            perturb_body(13 + 13 * k)
    return out


@dataclass
class SimResult:
    """In-memory simulation log plus bookkeeping counters."""

    columns: list
    rows: list
    events: list = field(default_factory=list)
    saturation_steps: int = 0
    max_renorm_delta: float = 0.0
    max_taut_residual: float = 0.0
    wall_time: float = 0.0
    final_state: np.ndarray | None = None

    def array(self) -> np.ndarray:
        return np.vstack(self.rows) if self.rows else np.zeros((0, len(self.columns)))

    def column(self, name: str) -> np.ndarray:
        return self.array()[:, self.columns.index(name)]


def simulate(spec: ScenarioSpec) -> SimResult:
    """Run a scenario to completion and return the log.

    Per step: sample the plan, inject feedback noise into the controller's
    view, compute and saturate inputs, integrate, then localize and apply
    any hybrid transitions before resuming from the event time.
    """
    start = time.perf_counter()
    if spec.mechanism.kind == "cable":
        result = _simulate_cable(spec)
    else:
        result = _simulate_structure(spec)
    result.wall_time = time.perf_counter() - start
    return result


def _simulate_cable(spec: ScenarioSpec) -> SimResult:
    sys = build_cable_system(spec)
    plan = spec.planner.build()
    controller = build_controller(spec, sys)
    kern = sys.kernels
    n = sys.n_robots
    x = initial_cable_state(spec)
    status = initial_cable_status(spec, x)
    rng = np.random.default_rng(spec.sim.seed)
    opts = spec.sim
    point_mass = sys.is_single
    columns = log_columns(n, point_mass)
    result = SimResult(columns=columns, rows=[])
    lengths = np.asarray(sys.lengths)
    qoff = quat_offsets(n)

    n_steps = int(round(opts.t_final / opts.dt))
    d_buf = np.empty(n)
    ddot_buf = np.empty(n)
    x_next = np.empty_like(x)
    renorm = np.zeros(1)
    u = np.zeros(4 * n)
    des = plan.sample(0.0)

    def metrics(state):
        st = kern.cable_metrics(state, sys.param_buf, d_buf, ddot_buf)
        if st != 0:
            raise NumericError("degenerate cable geometry during simulation")
        return d_buf, ddot_buf

    def fused_step(state, inputs, taut_u8, h):
        st = kern.rk4_cable_step(x_next, state, inputs, taut_u8, sys.param_buf,
                                 h, point_mass, renorm)
        if st != 0:
            raise NumericError(f"integration kernel failed with status {st}")
        if renorm[0] > RENORM_WARN:
            logger.warning("quaternion renormalization delta %.3e", renorm[0])
        result.max_renorm_delta = max(result.max_renorm_delta, renorm[0])
        return x_next.copy()

    def settle_guards(state, stat, t_now):
        """Apply resets until the guard is quiet.

        Each collision impulse perturbs the other taut cables, so repeated
        triggers at one instant are resolved as ONE growing joint collision:
        the participating set only ever expands, which bounds the cascade.
        """
        union: set = set()
        for _ in range(MAX_RESET_CASCADE):
            ev = hybrid.detect_guard(state, stat, sys, t=t_now)
            if ev is None:
                return state, stat
            union.update(ev.colliding)
            joint = hybrid.GuardEvent(
                time=t_now, went_slack=ev.went_slack,
                reestablished=ev.reestablished,
                jerked=sorted(union - set(ev.reestablished)),
                new_taut_count=ev.new_taut_count)
            state, stat = hybrid.apply_reset(state, sys, stat, joint)
            result.events.append(joint)
            result.rows.append(build_row(t_now, state, u, stat.taut,
                                         des.position, des.quaternion,
                                         point_mass, event=1))
        raise NumericError(f"guard cascade did not settle after {MAX_RESET_CASCADE} resets")

    def reproject(state, stat):
        d, _ = metrics(state)
        worst = 0.0
        for k in stat.taut_set:
            resid = abs(d[k] - lengths[k])
            worst = max(worst, resid)
            if resid > REPROJECT_TOL:
                p = sys.attach_points(state)[k]
                base = 13 + 13 * k
                state[base:base + 3] = p + (state[base:base + 3] - p) * (lengths[k] / d[k])
        result.max_taut_residual = max(result.max_taut_residual, worst)
        return state

    def advance(state, stat, t_now, h, depth=0):
        """Advance by h, localizing and applying at most a few nested events."""
        if depth > MAX_RESET_CASCADE:
            raise NumericError("event recursion did not terminate within one step")
        taut_u8 = np.ascontiguousarray(stat.taut, dtype=np.uint8)
        new = fused_step(state, u, taut_u8, h)
        ev = hybrid.detect_guard(new, stat, sys, t=t_now + h)
        if ev is None:
            return new, stat
        crossing = []
        for k in ev.went_slack:
            crossing.append((k, lengths[k] - hybrid.SLACK_TRIGGER))
        for k in ev.reestablished:
            crossing.append((k, lengths[k]))
        t_event, x_event = h, new
        if crossing:
            def stepper(st, uu):
                out = np.empty_like(st)
                code = kern.multi_cable_deriv(out, st, uu, taut_u8, sys.param_buf) \
                    if not point_mass else (
                        kern.single_taut_deriv(out, st, uu, sys.param_buf)
                        if taut_u8[0] else kern.single_slack_deriv(out, st, uu, sys.param_buf))
                if code != 0:
                    raise NumericError(f"derivative kernel failed ({code})")
                return out

            best = None
            for k, level in crossing:
                def guard(st, k=k, level=level):
                    dd, _ = metrics(st)
                    return dd[k] - level
                if (guard(state) < 0.0) == (guard(new) < 0.0):
                    continue    # already past at step start; treat at step end
                te, xe = locate_event(stepper, state, u, h, guard,
                                      tol_t=EVENT_TIME_TOL, quat_starts=qoff)
                if best is None or te < best[0]:
                    best = (te, xe)
            if best is not None:
                t_event, x_event = best
        ev_here = hybrid.detect_guard(x_event, stat, sys, t=t_now + t_event)
        if ev_here is None:
            # grazing crossing: the guard is only active at the step end
            t_event, x_event = h, new
        x_event, stat = settle_guards(x_event, stat, t_now + t_event)
        x_event = reproject(x_event, stat)
        remainder = h - t_event
        if remainder > 1e-12:
            return advance(x_event, stat, t_now + t_event, remainder, depth + 1)
        return x_event, stat

    try:
        # inconsistent initial rates are treated as an immediate transition
        x, status = settle_guards(x, status, 0.0)
        for step in range(n_steps):
            t = step * opts.dt
            des = plan.sample(t)
            if step % opts.control_decimation == 0:
                x_view = inject_noise(x, opts.noise, rng, n, point_mass)
                u_raw = controller.compute(x_view, status, des)
                u, clamped = saturate(u_raw, sys.robots)
                if clamped.any():
                    result.saturation_steps += 1
            result.rows.append(build_row(t, x, u, status.taut, des.position,
                                         des.quaternion, point_mass))
            x, status = advance(x, status, t, opts.dt)
            if (step + 1) % REPROJECT_EVERY == 0:
                x = reproject(x, status)
            else:
                d, _ = metrics(x)
                worst = max((abs(d[k] - lengths[k]) for k in status.taut_set),
                            default=0.0)
                result.max_taut_residual = max(result.max_taut_residual, worst)
        t_end = n_steps * opts.dt
        des = plan.sample(t_end)
        result.rows.append(build_row(t_end, x, u, status.taut, des.position,
                                     des.quaternion, point_mass))
        result.final_state = x
    except (NumericError, FloatingPointError) as exc:
        raise SimulationAbort(str(exc), partial=result) from exc
    return result


def _simulate_structure(spec: ScenarioSpec) -> SimResult:
    structure = build_structure(spec)
    plan = spec.planner.build()
    controller = build_controller(spec, structure)
    n = len(spec.robots)
    x = initial_structure_state(spec, structure)
    rng = np.random.default_rng(spec.sim.seed)
    opts = spec.sim
    columns = log_columns(n, point_mass=False)
    result = SimResult(columns=columns, rows=[])
    taut = np.ones(n, dtype=bool)
    u = np.zeros(4 * n)

    def deriv(state, inputs):
        return rigid_structure_deriv(state, inputs, structure)

    n_steps = int(round(opts.t_final / opts.dt))
    try:
        for step in range(n_steps):
            t = step * opts.dt
            des = plan.sample(t)
            if step % opts.control_decimation == 0:
                x_view = inject_noise(x, opts.noise, rng, n, point_mass=False,
                                      structure=True)
                u_raw = controller.compute(x_view, None, des)
                u, clamped = saturate(u_raw, spec.robots)
                if clamped.any():
                    result.saturation_steps += 1
            members = structure_to_members(x, structure)
            result.rows.append(build_row(t, members, u, taut, des.position,
                                         des.quaternion, point_mass=False))
            x = rk4_step(deriv, x, u, opts.dt, quat_starts=(6,))
        t_end = n_steps * opts.dt
        des = plan.sample(t_end)
        members = structure_to_members(x, structure)
        result.rows.append(build_row(t_end, members, u, taut, des.position,
                                     des.quaternion, point_mass=False))
        result.final_state = x
    except (NumericError, FloatingPointError) as exc:
        raise SimulationAbort(str(exc), partial=result) from exc
    return result
