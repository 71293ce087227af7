"""Guards and reset maps of the slack/taut hybrid automaton.

A cable is *taut* while the robot sits on the sphere of radius ``l_k`` about
its attach point.  Transitions:

* taut -> slack once the distance falls below ``l_k - SLACK_TRIGGER``
  (hysteresis band; the map is the identity);
* slack -> taut when the distance reaches ``l_k`` while still separating
  (``ddot > RATE_TOL``); this is an inelastic collision along the cable and
  resets the payload twist and the colliding robots' velocities;
* taut cables that are separating at a collision instant take part in the
  joint impulse without changing the taut count.

Resets never touch positions or attitudes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import CableSystem
from .errors import NumericError
from .so3 import hat, quat_to_rot
from .state import CableStatus

# Guard tolerances (meters / seconds); scenario config may override.
TAUT_BAND = 1e-9        # |d - l| below this counts as "on the sphere"
SLACK_TRIGGER = 1e-6    # taut -> slack once d < l - SLACK_TRIGGER
RATE_TOL = 1e-9         # minimum separation rate for a collision


@dataclass
class GuardEvent:
    """One hybrid transition: which cables slacken, re-tension, or jerk."""

    time: float
    went_slack: list       # I_p': taut cables that became slack
    reestablished: list    # I_z': slack cables that regained tension
    jerked: list           # I_p*: taut cables separating at the event
    new_taut_count: int

    @property
    def colliding(self) -> list:
        return sorted(self.reestablished + self.jerked)


def cable_metrics(x: np.ndarray, sys: CableSystem, k: int) -> tuple[float, float]:
    """Distance d_k between robot k and its attach point, and its rate."""
    d = np.empty(sys.n_robots)
    ddot = np.empty(sys.n_robots)
    st = sys.kernels.cable_metrics(x, sys.param_buf, d, ddot)
    if st != 0:
        raise NumericError(f"cable {k}: robot coincides with its attach point")
    return float(d[k]), float(ddot[k])


def all_cable_metrics(x: np.ndarray, sys: CableSystem) -> tuple[np.ndarray, np.ndarray]:
    d = np.empty(sys.n_robots)
    ddot = np.empty(sys.n_robots)
    st = sys.kernels.cable_metrics(x, sys.param_buf, d, ddot)
    if st != 0:
        raise NumericError("degenerate cable geometry (robot at attach point)")
    return d, ddot


def detect_guard(x: np.ndarray, status: CableStatus, sys: CableSystem,
                 t: float = 0.0,
                 slack_trigger: float = SLACK_TRIGGER,
                 rate_tol: float = RATE_TOL) -> GuardEvent | None:
    """Evaluate the hybrid guard at the current state.

    Returns ``None`` when no index set is populated.
    """
    d, ddot = all_cable_metrics(x, sys)
    lengths = np.asarray(sys.lengths)
    went_slack, reestablished, jerked = [], [], []
    for k in range(sys.n_robots):
        if status.taut[k]:
            if d[k] < lengths[k] - slack_trigger:
                went_slack.append(k)
            elif d[k] >= lengths[k] and ddot[k] > rate_tol:
                jerked.append(k)
        else:
            if d[k] >= lengths[k] and ddot[k] > rate_tol:
                reestablished.append(k)
    if not (went_slack or reestablished or jerked):
        return None
    r = status.n_taut + len(reestablished) - len(went_slack)
    return GuardEvent(time=t, went_slack=went_slack, reestablished=reestablished,
                      jerked=jerked, new_taut_count=r)


def single_reset(x: np.ndarray, sys: CableSystem) -> np.ndarray:
    """Inelastic cable collision for the single-robot point-mass system.

    Momentum along the cable is conserved and both along-cable velocity
    components jump to the common value; everything else is untouched.
    """
    out = x.copy()
    delta = x[0:3] - x[13:16]
    d = np.linalg.norm(delta)
    if d == 0.0:
        raise NumericError("degenerate cable geometry at reset")
    xi = delta / d
    m = sys.masses[0]
    m_l = sys.payload.mass
    v_l, v_q = x[3:6], x[16:19]
    v_common = (m * (xi @ v_q) + m_l * (xi @ v_l)) / (m + m_l)
    out[3:6] = v_l - (xi @ v_l) * xi + v_common * xi
    out[16:19] = v_q - (xi @ v_q) * xi + v_common * xi
    return out


@dataclass
class CollisionSystem:
    """The 6x6 payload impulse operator and its momentum stack."""

    j_bar: np.ndarray
    b: np.ndarray
    xi: dict = field(default_factory=dict)   # cable directions of the colliding set


def assemble_collision_system(x: np.ndarray, sys: CableSystem,
                              colliding: list) -> CollisionSystem:
    """Build J_bar and b from the pre-collision state for the given cable set."""
    m_l = sys.payload.mass
    j_l = sys.payload.inertia
    r_l = quat_to_rot(x[6:10])
    v_l, om_l = x[3:6], x[10:13]

    j_bar = np.zeros((6, 6))
    j_bar[0:3, 0:3] = m_l * np.eye(3)
    j_bar[3:6, 3:6] = j_l
    b = np.concatenate([m_l * v_l, j_l @ om_l])
    xi_map = {}
    p_all = sys.attach_points(x)
    for i in colliding:
        base = 13 + 13 * i
        delta = p_all[i] - x[base:base + 3]
        d = np.linalg.norm(delta)
        if d == 0.0:
            raise NumericError(f"cable {i}: degenerate geometry at collision")
        xi = delta / d
        xi_map[i] = xi
        m = sys.masses[i]
        g = np.cross(sys.rho[i], r_l.T @ xi)
        j_bar[0:3, 0:3] += m * np.outer(xi, xi)
        j_bar[0:3, 3:6] += m * np.outer(xi, g)
        j_bar[3:6, 0:3] += m * np.outer(g, xi)
        j_bar[3:6, 3:6] += m * np.outer(g, g)
        vi_par = (xi @ x[base + 3:base + 6]) * xi
        b[0:3] += m * vi_par
        b[3:6] += m * (xi @ x[base + 3:base + 6]) * g
    return CollisionSystem(j_bar=j_bar, b=b, xi=xi_map)


def multi_reset(x: np.ndarray, sys: CableSystem, event: GuardEvent) -> np.ndarray:
    """Joint inelastic collision reset for the colliding cable set.

    The payload twist jumps to ``J_bar^-1 b``; each colliding robot keeps its
    orthogonal velocity and snaps its along-cable component onto the attach
    point's.  Cables that merely went slack keep their state (identity map).
    """
    colliding = event.colliding
    if not colliding:
        return x.copy()
    cs = assemble_collision_system(x, sys, colliding)
    try:
        twist = np.linalg.solve(cs.j_bar, cs.b)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(cs.j_bar)
        raise NumericError(
            f"collision system solve failed (condition number {cond:.3e}); "
            "input state is corrupted") from exc
    out = x.copy()
    v_l_new, om_l_new = twist[0:3], twist[3:6]
    out[3:6] = v_l_new
    out[10:13] = om_l_new
    r_l = quat_to_rot(x[6:10])
    for i in colliding:
        base = 13 + 13 * i
        xi = cs.xi[i]
        v_i = x[base + 3:base + 6]
        pdot_new = v_l_new - r_l @ (hat(sys.rho[i]) @ om_l_new)
        out[base + 3:base + 6] = (xi @ pdot_new) * xi + (v_i - (xi @ v_i) * xi)
    return out


def apply_reset(x: np.ndarray, sys: CableSystem, status: CableStatus,
                event: GuardEvent) -> tuple[np.ndarray, CableStatus]:
    """Apply the full transition map and return the new state and cable flags."""
    if sys.is_single:
        new = single_reset(x, sys) if event.colliding else x.copy()
    else:
        new = multi_reset(x, sys, event)
    taut = status.taut.copy()
    taut[event.went_slack] = False
    taut[event.reestablished] = True
    return new, CableStatus(taut)
