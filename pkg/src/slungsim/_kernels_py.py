"""Pure NumPy reference kernels for the hot simulation loop.

A compiled Cython twin (``_kernels_c``) implements the same functions with
identical signatures and float semantics; :mod:`slungsim.backend` picks one
at import time.  Keep the two in lockstep — the backend-equivalence tests
compare them on random inputs.

All kernels operate on flat float64 arrays (layout in :mod:`slungsim.state`),
write into caller-provided ``out`` buffers and return a status code:

    0   success
    -1  non-finite result
    -2  singular linear system
    -3  zero desired-force vector (controller undefined)
    -4  degenerate cable geometry (robot at its attach point)

Parameter packs are built once per system by :func:`pack_cable_params` /
:func:`pack_control_params` so each call passes a single buffer.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

GRAV = 9.81

OK = 0
ERR_NONFINITE = -1
ERR_SINGULAR = -2
ERR_ZERO_FORCE = -3
ERR_DEGENERATE = -4

# cable-system parameter pack layout
_HDR = 20          # n, mL, JL(9), JLinv(9)
_RSTRIDE = 11      # m, Jdiag(3), Jinvdiag(3), l, rho(3)


def pack_cable_params(m_L, J_L, masses, inertias, lengths, rho) -> np.ndarray:
    """Flatten cable-system physical parameters into one kernel buffer."""
    n = len(masses)
    buf = np.zeros(_HDR + _RSTRIDE * n)
    buf[0] = float(n)
    buf[1] = m_L
    buf[2:11] = np.asarray(J_L, dtype=float).ravel()
    buf[11:20] = np.linalg.inv(J_L).ravel()
    for k in range(n):
        o = _HDR + _RSTRIDE * k
        buf[o] = masses[k]
        buf[o + 1:o + 4] = inertias[k]
        buf[o + 4:o + 7] = 1.0 / np.asarray(inertias[k], dtype=float)
        buf[o + 7] = lengths[k]
        buf[o + 8:o + 11] = rho[k]
    return buf


def _unpack(params):
    n = int(params[0])
    m_L = params[1]
    J_L = params[2:11].reshape(3, 3)
    J_L_inv = params[11:20].reshape(3, 3)
    robots = params[_HDR:_HDR + _RSTRIDE * n].reshape(n, _RSTRIDE)
    return n, m_L, J_L, J_L_inv, robots


def _quat_to_rot(q):
    w, x, y, z = q
    return np.array([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ])


def _quat_dot(q, w):
    return 0.5 * np.array([
        -q[1] * w[0] - q[2] * w[1] - q[3] * w[2],
        q[0] * w[0] + q[2] * w[2] - q[3] * w[1],
        q[0] * w[1] - q[1] * w[2] + q[3] * w[0],
        q[0] * w[2] + q[1] * w[1] - q[2] * w[0],
    ])


def _body_rates_deriv(q, omega, moment, j_diag, jinv_diag):
    """(qdot, omegadot) of one quadrotor body."""
    qdot = _quat_dot(q, omega)
    jw = j_diag * omega
    omegadot = jinv_diag * (moment - np.cross(omega, jw))
    return qdot, omegadot


def single_taut_deriv(out, x, u, params):
    """Taut single cable: payload and robot coupled through the cable direction."""
    n, m_L, _, _, robots = _unpack(params)
    m = robots[0, 0]
    l = robots[0, 7]
    g = np.array([0.0, 0.0, GRAV])

    x_l, v_l = x[0:3], x[3:6]
    xq, vq = x[13:16], x[16:19]
    q, omega = x[19:23], x[23:26]

    delta = x_l - xq
    d = np.sqrt(delta @ delta)
    if d == 0.0:
        return ERR_DEGENERATE
    xi = delta / d
    xidot = (v_l - vq) / l
    r = _quat_to_rot(q)
    uf = u[0] * r[:, 2]

    xidot2 = xidot @ xidot
    scale = (xi @ uf - m * l * xidot2) / (m + m_L)
    a_l = scale * xi - g
    xidd = np.cross(xi, np.cross(xi, uf)) / (m * l) - xidot2 * xi
    aq = a_l - l * xidd

    qdot, omegadot = _body_rates_deriv(q, omega, u[1:4], robots[0, 1:4], robots[0, 4:7])

    out[0:3] = v_l
    out[3:6] = a_l
    out[6:13] = 0.0
    out[13:16] = vq
    out[16:19] = aq
    out[19:23] = qdot
    out[23:26] = omegadot
    if not np.all(np.isfinite(out)):
        return ERR_NONFINITE
    return OK


def single_slack_deriv(out, x, u, params):
    """Slack single cable: payload free-falls, robot flies independently."""
    _, _, _, _, robots = _unpack(params)
    m = robots[0, 0]
    g = np.array([0.0, 0.0, GRAV])

    q, omega = x[19:23], x[23:26]
    r = _quat_to_rot(q)
    aq = (u[0] / m) * r[:, 2] - g
    qdot, omegadot = _body_rates_deriv(q, omega, u[1:4], robots[0, 1:4], robots[0, 4:7])

    out[0:3] = x[3:6]
    out[3:6] = -g
    out[6:13] = 0.0
    out[13:16] = x[16:19]
    out[16:19] = aq
    out[19:23] = qdot
    out[23:26] = omegadot
    if not np.all(np.isfinite(out)):
        return ERR_NONFINITE
    return OK


def multi_cable_deriv(out, x, u, taut, params):
    """n quadrotors on cables: 6x6 payload solve, then per-robot back-substitution.

    Taut robots are constrained to spheres about their attach points; slack
    robots fly free and do not load the payload.
    """
    n, m_L, J_L, J_L_inv, robots = _unpack(params)
    g = np.array([0.0, 0.0, GRAV])

    x_l, v_l = x[0:3], x[3:6]
    q_l, om_l = x[6:10], x[10:13]
    r_l = _quat_to_rot(q_l)

    a66 = np.zeros((6, 6))
    a66[0:3, 0:3] = m_L * np.eye(3)
    a66[3:6, 3:6] = J_L
    rhs = np.zeros(6)
    rhs[0:3] = -m_L * g
    rhs[3:6] = -np.cross(om_l, J_L @ om_l)

    # cached per-taut-robot quantities for back-substitution
    xi_c = np.zeros((n, 3))
    xidot2_c = np.zeros(n)
    uf_c = np.zeros((n, 3))
    cent_c = np.zeros((n, 3))

    for k in range(n):
        rb = robots[k]
        base = 13 + 13 * k
        q = x[base + 6:base + 10]
        r = _quat_to_rot(q)
        uf = u[4 * k] * r[:, 2]
        uf_c[k] = uf
        if not taut[k]:
            continue
        m, l, rho = rb[0], rb[7], rb[8:11]
        p = x_l + r_l @ rho
        pdot = v_l + r_l @ np.cross(om_l, rho)
        delta = p - x[base:base + 3]
        d = np.sqrt(delta @ delta)
        if d == 0.0:
            return ERR_DEGENERATE
        xi = delta / d
        xidot = (pdot - x[base + 3:base + 6]) / l
        cent = r_l @ np.cross(om_l, np.cross(om_l, rho))

        s = r_l.T @ xi
        gv = np.cross(rho, s)
        a66[0:3, 0:3] += m * np.outer(xi, xi)
        a66[0:3, 3:6] += m * np.outer(xi, gv)
        a66[3:6, 0:3] += m * np.outer(gv, xi)
        a66[3:6, 3:6] += m * np.outer(gv, gv)

        xidot2 = xidot @ xidot
        beta = xi @ uf - m * l * xidot2 - m * (xi @ (g + cent))
        rhs[0:3] += beta * xi
        rhs[3:6] += beta * gv

        xi_c[k] = xi
        xidot2_c[k] = xidot2
        cent_c[k] = cent

    try:
        acc6 = np.linalg.solve(a66, rhs)
    except np.linalg.LinAlgError:
        return ERR_SINGULAR
    a_l = acc6[0:3]
    omdot_l = acc6[3:6]

    out[0:3] = v_l
    out[3:6] = a_l
    out[6:10] = _quat_dot(q_l, om_l)
    out[10:13] = omdot_l

    for k in range(n):
        rb = robots[k]
        m = rb[0]
        base = 13 + 13 * k
        q = x[base + 6:base + 10]
        omega = x[base + 10:base + 13]
        if taut[k]:
            l, rho = rb[7], rb[8:11]
            xi = xi_c[k]
            a_att = a_l + g - r_l @ np.cross(rho, omdot_l) + cent_c[k]
            xidd = np.cross(xi, np.cross(xi, uf_c[k] - m * a_att)) / (m * l) - xidot2_c[k] * xi
            aq = (a_att - g) - l * xidd
        else:
            aq = uf_c[k] / m - g
        qdot, omegadot = _body_rates_deriv(q, omega, u[4 * k + 1:4 * k + 4], rb[1:4], rb[4:7])
        out[base:base + 3] = x[base + 3:base + 6]
        out[base + 3:base + 6] = aq
        out[base + 6:base + 10] = qdot
        out[base + 10:base + 13] = omegadot

    if not np.all(np.isfinite(out)):
        return ERR_NONFINITE
    return OK


def rigid_structure_deriv(out, x, fc, mc_vec, total_mass, j_c, j_c_inv):
    """Single rigid structure driven by a net thrust and moment."""
    q, omega = x[6:10], x[10:13]
    r = _quat_to_rot(q)
    out[0:3] = x[3:6]
    out[3:6] = (fc / total_mass) * r[:, 2] - np.array([0.0, 0.0, GRAV])
    out[6:10] = _quat_dot(q, omega)
    out[10:13] = j_c_inv @ (mc_vec - np.cross(omega, j_c @ omega))
    if not np.all(np.isfinite(out)):
        return ERR_NONFINITE
    return OK


def cable_metrics(x, params, out_d, out_ddot):
    """Distance and separation rate of every cable: d_k, ddot_k."""
    n, _, _, _, robots = _unpack(params)
    x_l, v_l = x[0:3], x[3:6]
    q_l, om_l = x[6:10], x[10:13]
    r_l = _quat_to_rot(q_l)
    for k in range(n):
        rho = robots[k, 8:11]
        base = 13 + 13 * k
        p = x_l + r_l @ rho
        pdot = v_l + r_l @ np.cross(om_l, rho)
        rel = x[base:base + 3] - p
        d = np.sqrt(rel @ rel)
        if d == 0.0:
            return ERR_DEGENERATE
        out_d[k] = d
        out_ddot[k] = (rel @ (x[base + 3:base + 6] - pdot)) / d
    return OK


def _cable_deriv_dispatch(out, x, u, taut, params, single):
    if single:
        if taut[0]:
            return single_taut_deriv(out, x, u, params)
        return single_slack_deriv(out, x, u, params)
    return multi_cable_deriv(out, x, u, taut, params)


def rk4_cable_step(x_out, x, u, taut, params, dt, single, renorm_out):
    """One classical RK4 step of a cable system, quaternions renormalized.

    ``renorm_out[0]`` receives the largest |norm - 1| removed by the final
    renormalization.
    """
    dim = x.shape[0]
    n = int(params[0])
    k1 = np.empty(dim)
    k2 = np.empty(dim)
    k3 = np.empty(dim)
    k4 = np.empty(dim)
    tmp = np.empty(dim)

    st = _cable_deriv_dispatch(k1, x, u, taut, params, single)
    if st != OK:
        return st
    tmp[:] = x + (0.5 * dt) * k1
    st = _cable_deriv_dispatch(k2, tmp, u, taut, params, single)
    if st != OK:
        return st
    tmp[:] = x + (0.5 * dt) * k2
    st = _cable_deriv_dispatch(k3, tmp, u, taut, params, single)
    if st != OK:
        return st
    tmp[:] = x + dt * k3
    st = _cable_deriv_dispatch(k4, tmp, u, taut, params, single)
    if st != OK:
        return st
    x_out[:] = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    worst = 0.0
    for off in [6] + [13 + 13 * k + 6 for k in range(n)]:
        q = x_out[off:off + 4]
        norm = np.sqrt(q @ q)
        if norm == 0.0:
            return ERR_NONFINITE
        worst = max(worst, abs(norm - 1.0))
        x_out[off:off + 4] = q / norm
    renorm_out[0] = worst
    return OK


# ---------------------------------------------------------------------------
# controllers
# ---------------------------------------------------------------------------

# control parameter pack: n, mL, JL(9), per robot (m, Jdiag3, l, rho3), then
# the tension-distribution matrix P^T (P P^T)^-1 row-major (3n x 6).
_CHDR = 11
_CRSTRIDE = 8


def pack_control_params(m_L, J_L, masses, inertias, lengths, rho, pinv_p) -> np.ndarray:
    n = len(masses)
    size = _CHDR + _CRSTRIDE * n + (18 * n if pinv_p is not None else 0)
    buf = np.zeros(size)
    buf[0] = float(n)
    buf[1] = m_L
    buf[2:11] = np.asarray(J_L, dtype=float).ravel()
    for k in range(n):
        o = _CHDR + _CRSTRIDE * k
        buf[o] = masses[k]
        buf[o + 1:o + 4] = inertias[k]
        buf[o + 4] = lengths[k] if lengths is not None else 0.0
        buf[o + 5:o + 8] = rho[k]
    if pinv_p is not None:
        buf[_CHDR + _CRSTRIDE * n:] = np.asarray(pinv_p, dtype=float).ravel()
    return buf


def _unpack_control(params):
    n = int(params[0])
    m_L = params[1]
    J_L = params[2:11].reshape(3, 3)
    robots = params[_CHDR:_CHDR + _CRSTRIDE * n].reshape(n, _CRSTRIDE)
    rest = params[_CHDR + _CRSTRIDE * n:]
    pinv_p = rest.reshape(3 * n, 6) if rest.size else None
    return n, m_L, J_L, robots, pinv_p


def _attitude_moment(r, omega, b3_des, yaw_des, k_r, k_om, j_diag):
    """Geometric attitude law tracking thrust direction ``b3_des`` and a yaw."""
    b1c = np.array([np.cos(yaw_des), np.sin(yaw_des), 0.0])
    b2 = np.cross(b3_des, b1c)
    nb2 = np.sqrt(b2 @ b2)
    if nb2 < 1e-9:
        b1c = np.array([0.0, 1.0, 0.0])
        b2 = np.cross(b3_des, b1c)
        nb2 = np.sqrt(b2 @ b2)
    b2 = b2 / nb2
    b1 = np.cross(b2, b3_des)
    r_des = np.column_stack([b1, b2, b3_des])
    e_rm = r.T @ r_des - r_des.T @ r
    e_r = 0.5 * np.array([e_rm[2, 1], e_rm[0, 2], e_rm[1, 0]])
    e_om = -omega   # zero desired body rate for the inner attitude loop
    return k_r * e_r + k_om * e_om + np.cross(omega, j_diag * omega)


def _vee_err(r, r_des):
    m = r.T @ r_des - r_des.T @ r
    return 0.5 * np.array([m[2, 1], m[0, 2], m[1, 0]])


def single_cable_control(out_u, out_xi_des, x, taut, des, yaw_des, integral,
                         om_ff, dom_ff, gains, params):
    """Geometric payload controller for one quadrotor with a cable.

    In the slack mode the robot tracks the point ``x_des - l xi_des`` with a
    plain position controller so it can re-establish tension.
    """
    _, m_L, _, robots, _ = _unpack_control(params)
    m = robots[0, 0]
    j_diag = robots[0, 1:4]
    l = robots[0, 4]
    g = np.array([0.0, 0.0, GRAV])
    kp, kd, ki = gains[0:3], gains[3:6], gains[6:9]
    k_r, k_om = gains[9:12], gains[12:15]
    k_xi, k_w = gains[15:18], gains[18:21]

    x_l, v_l = x[0:3], x[3:6]
    xq, vq = x[13:16], x[16:19]
    q, omega = x[19:23], x[23:26]
    r = _quat_to_rot(q)

    e_x = des[0:3] - x_l
    e_v = des[3:6] - v_l
    pid = kp * e_x + kd * e_v + ki * integral + des[6:9]

    delta = x_l - xq
    d = np.sqrt(delta @ delta)
    if d == 0.0:
        return ERR_DEGENERATE
    xi = delta / d
    xidot = (v_l - vq) / l
    xidot2 = xidot @ xidot

    f_des = (m + m_L) * (pid + g) + (m * l * xidot2) * xi
    nf = np.sqrt(f_des @ f_des)
    if nf < 1e-12:
        return ERR_ZERO_FORCE
    xi_des = -f_des / nf
    out_xi_des[:] = xi_des

    if taut[0]:
        e_xi = np.cross(xi_des, xi)
        omega_cable = np.cross(xi, xidot)
        om0, dom0 = np.ravel(om_ff)[0:3], np.ravel(dom_ff)[0:3]
        e_omc = omega_cable + np.cross(xi, np.cross(xi, om0))
        fvec = (xi @ f_des) * xi
        fvec = fvec - (m * l) * np.cross(xi, k_xi * e_xi + k_w * e_omc + (xi @ om0) * xidot)
        fvec = fvec + (m * l) * np.cross(xi, dom0)
    else:
        target = des[0:3] - l * xi_des
        fvec = m * (kp * (target - xq) + kd * (des[3:6] - vq) + des[6:9] + g)

    nfv = np.sqrt(fvec @ fvec)
    if nfv < 1e-12:
        return ERR_ZERO_FORCE
    out_u[0] = fvec @ r[:, 2]
    out_u[1:4] = _attitude_moment(r, omega, fvec / nfv, yaw_des[0], k_r, k_om, j_diag)
    if not (np.all(np.isfinite(out_u)) and np.all(np.isfinite(out_xi_des))):
        return ERR_NONFINITE
    return OK


def multi_cable_control(out_u, out_xi_des, x, taut, des, yaw_des, integral,
                        om_ff, dom_ff, gains, params):
    """Cooperative payload controller: payload wrench -> cable tensions -> robots."""
    n, m_L, j_l, robots, pinv_p = _unpack_control(params)
    g = np.array([0.0, 0.0, GRAV])
    kp, kd, ki = gains[0:3], gains[3:6], gains[6:9]
    k_r, k_om = gains[9:12], gains[12:15]
    k_xi, k_w = gains[15:18], gains[18:21]
    k_rl, k_oml = gains[21:24], gains[24:27]

    x_l, v_l = x[0:3], x[3:6]
    q_l, om_l = x[6:10], x[10:13]
    r_l = _quat_to_rot(q_l)

    e_x = des[0:3] - x_l
    e_v = des[3:6] - v_l
    acc_cmd = kp * e_x + kd * e_v + ki * integral + des[6:9]
    f_des = m_L * (acc_cmd + g)

    r_des = _quat_to_rot(des[9:13])
    om_des, domdes = des[13:16], des[16:19]
    t1 = r_l.T @ (r_des @ om_des)
    e_rl = _vee_err(r_l, r_des)
    e_oml = t1 - om_l
    m_des = k_rl * e_rl + k_oml * e_oml + j_l @ (r_l.T @ (r_des @ domdes)) \
        + np.cross(t1, j_l @ t1)

    wrench = np.concatenate([r_l.T @ f_des, m_des])
    mu = (pinv_p @ wrench).reshape(n, 3) @ r_l.T   # mu_k = R_L (pinvP_k w)

    for k in range(n):
        rb = robots[k]
        m, j_diag, l, rho = rb[0], rb[1:4], rb[4], rb[5:8]
        base = 13 + 13 * k
        xq, vq = x[base:base + 3], x[base + 3:base + 6]
        q, omega = x[base + 6:base + 10], x[base + 10:base + 13]
        r = _quat_to_rot(q)

        mu_k = mu[k]
        nmu = np.sqrt(mu_k @ mu_k)
        if nmu < 1e-12:
            return ERR_ZERO_FORCE
        xi_des = -mu_k / nmu
        out_xi_des[k] = xi_des

        if taut[k]:
            p = x_l + r_l @ rho
            pdot = v_l + r_l @ np.cross(om_l, rho)
            delta = p - xq
            d = np.sqrt(delta @ delta)
            if d == 0.0:
                return ERR_DEGENERATE
            xi = delta / d
            xidot = (pdot - vq) / l
            omega_cable = np.cross(xi, xidot)
            a_c = acc_cmd + g + r_l @ np.cross(om_l, np.cross(om_l, rho))
            u_par = (xi @ mu_k) * xi + (m * l * (omega_cable @ omega_cable)) * xi \
                + m * (xi @ a_c) * xi
            e_xi = np.cross(xi_des, xi)
            e_omc = omega_cable + np.cross(xi, np.cross(xi, om_ff[k]))
            u_perp = -(m * l) * np.cross(xi, k_xi * e_xi + k_w * e_omc + (xi @ om_ff[k]) * xidot)
            u_perp = u_perp + (m * l) * np.cross(xi, dom_ff[k])
            u_perp = u_perp - m * np.cross(xi, np.cross(xi, a_c))
            u_vec = u_par + u_perp
        else:
            target = des[0:3] + r_des @ rho - l * xi_des
            vt = des[3:6] + r_des @ np.cross(om_des, rho)
            u_vec = m * (kp * (target - xq) + kd * (vt - vq) + des[6:9] + g)

        nuv = np.sqrt(u_vec @ u_vec)
        if nuv < 1e-12:
            return ERR_ZERO_FORCE
        out_u[4 * k] = u_vec @ r[:, 2]
        out_u[4 * k + 1:4 * k + 4] = _attitude_moment(
            r, omega, u_vec / nuv, yaw_des[k], k_r, k_om, j_diag)

    if not (np.all(np.isfinite(out_u)) and np.all(np.isfinite(out_xi_des))):
        return ERR_NONFINITE
    return OK
