# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the hot simulation loop.

Function-by-function twin of ``slungsim._kernels_py`` (same signatures, same
status codes, same parameter-pack layout, same arithmetic order).  The
backend-equivalence tests compare the two on random inputs; keep them in
lockstep.
"""

import numpy as np

from libc.math cimport cos, sin, sqrt

# parameter packing is setup-time work: share the reference implementation
from slungsim._kernels_py import pack_cable_params, pack_control_params

BACKEND_NAME = "c"

GRAV = 9.81
OK = 0
ERR_NONFINITE = -1
ERR_SINGULAR = -2
ERR_ZERO_FORCE = -3
ERR_DEGENERATE = -4
ERR_TOO_LARGE = -5

DEF MAXN = 64                  # robots
DEF MAXDIM = 13 + 13 * MAXN
DEF GRAV_C = 9.81
DEF HDR = 20                   # cable param pack header
DEF RSTRIDE = 11
DEF CHDR = 11                  # control param pack header
DEF CRSTRIDE = 8
DEF C_OK = 0
DEF C_ERR_NONFINITE = -1
DEF C_ERR_SINGULAR = -2
DEF C_ERR_ZERO_FORCE = -3
DEF C_ERR_DEGENERATE = -4
DEF C_ERR_TOO_LARGE = -5


cdef inline double _d3(const double* a, const double* b) noexcept nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef inline void _cross(const double* a, const double* b, double* out) noexcept nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline void _mv3(const double* m, const double* v, double* out) noexcept nogil:
    # row-major 3x3 times vector
    out[0] = m[0] * v[0] + m[1] * v[1] + m[2] * v[2]
    out[1] = m[3] * v[0] + m[4] * v[1] + m[5] * v[2]
    out[2] = m[6] * v[0] + m[7] * v[1] + m[8] * v[2]


cdef inline void _mtv3(const double* m, const double* v, double* out) noexcept nogil:
    # transpose times vector
    out[0] = m[0] * v[0] + m[3] * v[1] + m[6] * v[2]
    out[1] = m[1] * v[0] + m[4] * v[1] + m[7] * v[2]
    out[2] = m[2] * v[0] + m[5] * v[1] + m[8] * v[2]


cdef inline void _qrot(const double* q, double* r) noexcept nogil:
    cdef double w = q[0], x = q[1], y = q[2], z = q[3]
    r[0] = 1.0 - 2.0 * (y * y + z * z)
    r[1] = 2.0 * (x * y - w * z)
    r[2] = 2.0 * (x * z + w * y)
    r[3] = 2.0 * (x * y + w * z)
    r[4] = 1.0 - 2.0 * (x * x + z * z)
    r[5] = 2.0 * (y * z - w * x)
    r[6] = 2.0 * (x * z - w * y)
    r[7] = 2.0 * (y * z + w * x)
    r[8] = 1.0 - 2.0 * (x * x + y * y)


cdef inline void _qdot(const double* q, const double* w, double* out) noexcept nogil:
    out[0] = 0.5 * (-q[1] * w[0] - q[2] * w[1] - q[3] * w[2])
    out[1] = 0.5 * (q[0] * w[0] + q[2] * w[2] - q[3] * w[1])
    out[2] = 0.5 * (q[0] * w[1] - q[1] * w[2] + q[3] * w[0])
    out[3] = 0.5 * (q[0] * w[2] + q[1] * w[1] - q[2] * w[0])


cdef inline void _body_rates(const double* q, const double* omega,
                             const double* moment, const double* jd,
                             const double* jinvd, double* qdot,
                             double* omegadot) noexcept nogil:
    cdef double jw[3]
    cdef double cr[3]
    _qdot(q, omega, qdot)
    jw[0] = jd[0] * omega[0]
    jw[1] = jd[1] * omega[1]
    jw[2] = jd[2] * omega[2]
    _cross(omega, jw, cr)
    omegadot[0] = jinvd[0] * (moment[0] - cr[0])
    omegadot[1] = jinvd[1] * (moment[1] - cr[1])
    omegadot[2] = jinvd[2] * (moment[2] - cr[2])


cdef inline bint _finite(const double* v, int n) noexcept nogil:
    cdef int i
    for i in range(n):
        if not (v[i] == v[i]) or v[i] > 1e300 or v[i] < -1e300:
            return False
    return True


cdef int _solve6(double* a, double* b, double* out) noexcept nogil:
    """Gaussian elimination with partial pivoting on a 6x6 system."""
    cdef int i, j, k, piv
    cdef double best, tmp, factor
    cdef int perm[6]
    for i in range(6):
        perm[i] = i
    for k in range(6):
        piv = k
        best = a[6 * k + k]
        if best < 0:
            best = -best
        for i in range(k + 1, 6):
            tmp = a[6 * i + k]
            if tmp < 0:
                tmp = -tmp
            if tmp > best:
                best = tmp
                piv = i
        if best < 1e-300:
            return C_ERR_SINGULAR
        if piv != k:
            for j in range(6):
                tmp = a[6 * k + j]
                a[6 * k + j] = a[6 * piv + j]
                a[6 * piv + j] = tmp
            tmp = b[k]
            b[k] = b[piv]
            b[piv] = tmp
        for i in range(k + 1, 6):
            factor = a[6 * i + k] / a[6 * k + k]
            a[6 * i + k] = 0.0
            for j in range(k + 1, 6):
                a[6 * i + j] -= factor * a[6 * k + j]
            b[i] -= factor * b[k]
    for k in range(5, -1, -1):
        tmp = b[k]
        for j in range(k + 1, 6):
            tmp -= a[6 * k + j] * out[j]
        out[k] = tmp / a[6 * k + k]
    return C_OK


# ---------------------------------------------------------------------------
# dynamics
# ---------------------------------------------------------------------------

cdef int _single_taut(double* out, const double* x, const double* u,
                      const double* p) noexcept nogil:
    cdef double m = p[HDR + 0]
    cdef double m_l = p[1]
    cdef double l = p[HDR + 7]
    cdef double delta[3]
    cdef double xi[3]
    cdef double xidot[3]
    cdef double r[9]
    cdef double uf[3]
    cdef double tmp[3]
    cdef double xidd[3]
    cdef double d, xidot2, scale
    cdef int i

    for i in range(3):
        delta[i] = x[i] - x[13 + i]
    d = sqrt(_d3(delta, delta))
    if d == 0.0:
        return C_ERR_DEGENERATE
    for i in range(3):
        xi[i] = delta[i] / d
        xidot[i] = (x[3 + i] - x[16 + i]) / l
    _qrot(x + 19, r)
    for i in range(3):
        uf[i] = u[0] * r[3 * i + 2]
    xidot2 = _d3(xidot, xidot)
    scale = (_d3(xi, uf) - m * l * xidot2) / (m + m_l)
    # payload acceleration
    out[3] = scale * xi[0]
    out[4] = scale * xi[1]
    out[5] = scale * xi[2] - GRAV_C
    _cross(xi, uf, tmp)
    _cross(xi, tmp, xidd)
    for i in range(3):
        xidd[i] = xidd[i] / (m * l) - xidot2 * xi[i]
        out[16 + i] = out[3 + i] - l * xidd[i]
    for i in range(3):
        out[i] = x[3 + i]
        out[13 + i] = x[16 + i]
    for i in range(6, 13):
        out[i] = 0.0
    _body_rates(x + 19, x + 23, u + 1, p + HDR + 1, p + HDR + 4,
                out + 19, out + 23)
    if not _finite(out, 26):
        return C_ERR_NONFINITE
    return C_OK


cdef int _single_slack(double* out, const double* x, const double* u,
                       const double* p) noexcept nogil:
    cdef double m = p[HDR + 0]
    cdef double r[9]
    cdef int i
    _qrot(x + 19, r)
    for i in range(3):
        out[i] = x[3 + i]
        out[13 + i] = x[16 + i]
        out[3 + i] = 0.0
        out[16 + i] = (u[0] / m) * r[3 * i + 2]
    out[5] = -GRAV_C
    out[18] -= GRAV_C
    for i in range(6, 13):
        out[i] = 0.0
    _body_rates(x + 19, x + 23, u + 1, p + HDR + 1, p + HDR + 4,
                out + 19, out + 23)
    if not _finite(out, 26):
        return C_ERR_NONFINITE
    return C_OK


cdef int _multi_cable(double* out, const double* x, const double* u,
                      const unsigned char* taut, const double* p) noexcept nogil:
    cdef int n = <int>p[0]
    cdef double m_l = p[1]
    cdef const double* j_l = p + 2
    cdef double r_l[9]
    cdef double a66[36]
    cdef double rhs[6]
    cdef double acc6[6]
    cdef double xi_c[3 * MAXN]
    cdef double cent_c[3 * MAXN]
    cdef double uf_c[3 * MAXN]
    cdef double xidot2_c[MAXN]
    cdef double jw[3]
    cdef double tmp[3]
    cdef double tmp2[3]
    cdef double pk[3]
    cdef double pdot[3]
    cdef double delta[3]
    cdef double xi[3]
    cdef double xidot[3]
    cdef double s[3]
    cdef double gv[3]
    cdef double cent[3]
    cdef double r_k[9]
    cdef double a_att[3]
    cdef double xidd[3]
    cdef double d, m, l, beta, xidot2
    cdef const double* rb
    cdef const double* rho
    cdef int i, j, k, base, st

    if n > MAXN:
        return C_ERR_TOO_LARGE
    _qrot(x + 6, r_l)

    for i in range(36):
        a66[i] = 0.0
    a66[0] = m_l
    a66[7] = m_l
    a66[14] = m_l
    for i in range(3):
        for j in range(3):
            a66[(3 + i) * 6 + (3 + j)] = j_l[3 * i + j]
    rhs[0] = 0.0
    rhs[1] = 0.0
    rhs[2] = -m_l * GRAV_C
    _mv3(j_l, x + 10, jw)
    _cross(x + 10, jw, tmp)
    rhs[3] = -tmp[0]
    rhs[4] = -tmp[1]
    rhs[5] = -tmp[2]

    for k in range(n):
        rb = p + HDR + RSTRIDE * k
        base = 13 + 13 * k
        _qrot(x + base + 6, r_k)
        for i in range(3):
            uf_c[3 * k + i] = u[4 * k] * r_k[3 * i + 2]
        if taut[k] == 0:
            continue
        m = rb[0]
        l = rb[7]
        rho = rb + 8
        _mv3(r_l, rho, tmp)
        for i in range(3):
            pk[i] = x[i] + tmp[i]
        _cross(x + 10, rho, tmp)
        _mv3(r_l, tmp, tmp2)
        for i in range(3):
            pdot[i] = x[3 + i] + tmp2[i]
            delta[i] = pk[i] - x[base + i]
        d = sqrt(_d3(delta, delta))
        if d == 0.0:
            return C_ERR_DEGENERATE
        for i in range(3):
            xi[i] = delta[i] / d
            xidot[i] = (pdot[i] - x[base + 3 + i]) / l
        _cross(x + 10, rho, tmp)
        _cross(x + 10, tmp, tmp2)
        _mv3(r_l, tmp2, cent)

        _mtv3(r_l, xi, s)
        _cross(rho, s, gv)
        for i in range(3):
            for j in range(3):
                a66[i * 6 + j] += m * xi[i] * xi[j]
                a66[i * 6 + 3 + j] += m * xi[i] * gv[j]
                a66[(3 + i) * 6 + j] += m * gv[i] * xi[j]
                a66[(3 + i) * 6 + 3 + j] += m * gv[i] * gv[j]

        xidot2 = _d3(xidot, xidot)
        tmp[0] = cent[0]
        tmp[1] = cent[1]
        tmp[2] = cent[2] + GRAV_C
        beta = _d3(xi, uf_c + 3 * k) - m * l * xidot2 - m * _d3(xi, tmp)
        for i in range(3):
            rhs[i] += beta * xi[i]
            rhs[3 + i] += beta * gv[i]
            xi_c[3 * k + i] = xi[i]
            cent_c[3 * k + i] = cent[i]
        xidot2_c[k] = xidot2

    st = _solve6(a66, rhs, acc6)
    if st != C_OK:
        return st

    for i in range(3):
        out[i] = x[3 + i]
        out[3 + i] = acc6[i]
        out[10 + i] = acc6[3 + i]
    _qdot(x + 6, x + 10, out + 6)

    for k in range(n):
        rb = p + HDR + RSTRIDE * k
        base = 13 + 13 * k
        m = rb[0]
        if taut[k] != 0:
            l = rb[7]
            rho = rb + 8
            _cross(rho, acc6 + 3, tmp)
            _mv3(r_l, tmp, tmp2)
            for i in range(3):
                a_att[i] = acc6[i] - tmp2[i] + cent_c[3 * k + i]
            a_att[2] += GRAV_C
            for i in range(3):
                tmp[i] = uf_c[3 * k + i] - m * a_att[i]
            _cross(xi_c + 3 * k, tmp, tmp2)
            _cross(xi_c + 3 * k, tmp2, xidd)
            for i in range(3):
                xidd[i] = xidd[i] / (m * l) - xidot2_c[k] * xi_c[3 * k + i]
                out[base + 3 + i] = (a_att[i] - l * xidd[i])
            out[base + 5] -= GRAV_C
        else:
            for i in range(3):
                out[base + 3 + i] = uf_c[3 * k + i] / m
            out[base + 5] -= GRAV_C
        for i in range(3):
            out[base + i] = x[base + 3 + i]
        _body_rates(x + base + 6, x + base + 10, u + 4 * k + 1,
                    rb + 1, rb + 4, out + base + 6, out + base + 10)

    if not _finite(out, 13 + 13 * n):
        return C_ERR_NONFINITE
    return C_OK


def single_taut_deriv(double[::1] out, double[::1] x, double[::1] u,
                      double[::1] params):
    return _single_taut(&out[0], &x[0], &u[0], &params[0])


def single_slack_deriv(double[::1] out, double[::1] x, double[::1] u,
                       double[::1] params):
    return _single_slack(&out[0], &x[0], &u[0], &params[0])


def multi_cable_deriv(double[::1] out, double[::1] x, double[::1] u,
                      const unsigned char[::1] taut, double[::1] params):
    return _multi_cable(&out[0], &x[0], &u[0], &taut[0], &params[0])


def rigid_structure_deriv(double[::1] out, double[::1] x, double fc,
                          mc_vec, double total_mass, j_c, j_c_inv):
    cdef double[::1] mc = np.ascontiguousarray(mc_vec, dtype=np.float64)
    cdef double[::1] jc = np.ascontiguousarray(j_c, dtype=np.float64).ravel()
    cdef double[::1] jci = np.ascontiguousarray(j_c_inv, dtype=np.float64).ravel()
    cdef double r[9]
    cdef double jw[3]
    cdef double cr[3]
    cdef double mc_net[3]
    cdef int i
    _qrot(&x[6], r)
    for i in range(3):
        out[i] = x[3 + i]
        out[3 + i] = (fc / total_mass) * r[3 * i + 2]
    out[5] -= GRAV_C
    _qdot(&x[6], &x[10], &out[6])
    _mv3(&jc[0], &x[10], jw)
    _cross(&x[10], jw, cr)
    for i in range(3):
        mc_net[i] = mc[i] - cr[i]
    _mv3(&jci[0], mc_net, &out[10])
    if not _finite(&out[0], 13):
        return C_ERR_NONFINITE
    return C_OK


cdef int _metrics(const double* x, const double* p, double* out_d,
                  double* out_ddot) noexcept nogil:
    cdef int n = <int>p[0]
    cdef double r_l[9]
    cdef double tmp[3]
    cdef double tmp2[3]
    cdef double pk[3]
    cdef double pdot[3]
    cdef double rel[3]
    cdef double reldot[3]
    cdef double d
    cdef const double* rho
    cdef int i, k, base
    _qrot(x + 6, r_l)
    for k in range(n):
        rho = p + HDR + RSTRIDE * k + 8
        base = 13 + 13 * k
        _mv3(r_l, rho, tmp)
        _cross(x + 10, rho, tmp2)
        for i in range(3):
            pk[i] = x[i] + tmp[i]
        _mv3(r_l, tmp2, tmp)
        for i in range(3):
            pdot[i] = x[3 + i] + tmp[i]
            rel[i] = x[base + i] - pk[i]
            reldot[i] = x[base + 3 + i] - pdot[i]
        d = sqrt(_d3(rel, rel))
        if d == 0.0:
            return C_ERR_DEGENERATE
        out_d[k] = d
        out_ddot[k] = _d3(rel, reldot) / d
    return C_OK


def cable_metrics(double[::1] x, double[::1] params, double[::1] out_d,
                  double[::1] out_ddot):
    return _metrics(&x[0], &params[0], &out_d[0], &out_ddot[0])


cdef int _cable_deriv(double* out, const double* x, const double* u,
                      const unsigned char* taut, const double* p,
                      bint single) noexcept nogil:
    if single:
        if taut[0] != 0:
            return _single_taut(out, x, u, p)
        return _single_slack(out, x, u, p)
    return _multi_cable(out, x, u, taut, p)


def rk4_cable_step(double[::1] x_out, double[::1] x, double[::1] u,
                   const unsigned char[::1] taut, double[::1] params,
                   double dt, bint single, double[::1] renorm_out):
    cdef int n = <int>params[0]
    cdef int dim = 13 + 13 * n
    cdef double k1[MAXDIM]
    cdef double k2[MAXDIM]
    cdef double k3[MAXDIM]
    cdef double k4[MAXDIM]
    cdef double tmp[MAXDIM]
    cdef double worst, norm, delta
    cdef int i, k, off, st
    if n > MAXN:
        return C_ERR_TOO_LARGE
    st = _cable_deriv(k1, &x[0], &u[0], &taut[0], &params[0], single)
    if st != C_OK:
        return st
    for i in range(dim):
        tmp[i] = x[i] + (0.5 * dt) * k1[i]
    st = _cable_deriv(k2, tmp, &u[0], &taut[0], &params[0], single)
    if st != C_OK:
        return st
    for i in range(dim):
        tmp[i] = x[i] + (0.5 * dt) * k2[i]
    st = _cable_deriv(k3, tmp, &u[0], &taut[0], &params[0], single)
    if st != C_OK:
        return st
    for i in range(dim):
        tmp[i] = x[i] + dt * k3[i]
    st = _cable_deriv(k4, tmp, &u[0], &taut[0], &params[0], single)
    if st != C_OK:
        return st
    for i in range(dim):
        x_out[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])

    worst = 0.0
    for k in range(n + 1):
        off = 6 if k == 0 else 13 + 13 * (k - 1) + 6
        norm = sqrt(x_out[off] * x_out[off] + x_out[off + 1] * x_out[off + 1]
                    + x_out[off + 2] * x_out[off + 2] + x_out[off + 3] * x_out[off + 3])
        if norm == 0.0:
            return C_ERR_NONFINITE
        delta = norm - 1.0
        if delta < 0.0:
            delta = -delta
        if delta > worst:
            worst = delta
        for i in range(4):
            x_out[off + i] = x_out[off + i] / norm
    renorm_out[0] = worst
    return C_OK


# ---------------------------------------------------------------------------
# controllers
# ---------------------------------------------------------------------------

cdef int _att_moment(const double* r, const double* omega, const double* b3,
                     double yaw, const double* kr, const double* kom,
                     const double* jd, double* out) noexcept nogil:
    cdef double b1c[3]
    cdef double b1[3]
    cdef double b2[3]
    cdef double rdes[9]
    cdef double m[9]
    cdef double e_r[3]
    cdef double jw[3]
    cdef double cr[3]
    cdef double nb2
    cdef int i, j, k
    b1c[0] = cos(yaw)
    b1c[1] = sin(yaw)
    b1c[2] = 0.0
    _cross(b3, b1c, b2)
    nb2 = sqrt(_d3(b2, b2))
    if nb2 < 1e-9:
        b1c[0] = 0.0
        b1c[1] = 1.0
        b1c[2] = 0.0
        _cross(b3, b1c, b2)
        nb2 = sqrt(_d3(b2, b2))
    for i in range(3):
        b2[i] = b2[i] / nb2
    _cross(b2, b3, b1)
    for i in range(3):
        rdes[3 * i + 0] = b1[i]
        rdes[3 * i + 1] = b2[i]
        rdes[3 * i + 2] = b3[i]
    # m = r^T rdes
    for i in range(3):
        for j in range(3):
            m[3 * i + j] = (r[0 + i] * rdes[0 + j] + r[3 + i] * rdes[3 + j]
                            + r[6 + i] * rdes[6 + j])
    e_r[0] = 0.5 * (m[3 * 2 + 1] - m[3 * 1 + 2])
    e_r[1] = 0.5 * (m[3 * 0 + 2] - m[3 * 2 + 0])
    e_r[2] = 0.5 * (m[3 * 1 + 0] - m[3 * 0 + 1])
    jw[0] = jd[0] * omega[0]
    jw[1] = jd[1] * omega[1]
    jw[2] = jd[2] * omega[2]
    _cross(omega, jw, cr)
    for i in range(3):
        out[i] = kr[i] * e_r[i] + kom[i] * (-omega[i]) + cr[i]
    return C_OK


def single_cable_control(double[::1] out_u, double[:, ::1] out_xi_des,
                         double[::1] x, const unsigned char[::1] taut,
                         double[::1] des, double[::1] yaw_des,
                         double[::1] integral, double[:, ::1] om_ff,
                         double[:, ::1] dom_ff, double[::1] gains,
                         double[::1] params):
    cdef double m = params[CHDR + 0]
    cdef double m_l = params[1]
    cdef double l = params[CHDR + 4]
    cdef const double* jd = &params[CHDR + 1]
    cdef const double* kp = &gains[0]
    cdef const double* kd = &gains[3]
    cdef const double* ki = &gains[6]
    cdef const double* kr = &gains[9]
    cdef const double* kom = &gains[12]
    cdef const double* kxi = &gains[15]
    cdef const double* kw = &gains[18]
    cdef double r[9]
    cdef double e_x[3]
    cdef double e_v[3]
    cdef double pid[3]
    cdef double delta[3]
    cdef double xi[3]
    cdef double xidot[3]
    cdef double f_des[3]
    cdef double xi_des[3]
    cdef double e_xi[3]
    cdef double omc[3]
    cdef double e_omc[3]
    cdef double fvec[3]
    cdef double tmp[3]
    cdef double tmp2[3]
    cdef double target[3]
    cdef double d, nf, xidot2, nfv
    cdef int i

    for i in range(3):
        e_x[i] = des[i] - x[i]
        e_v[i] = des[3 + i] - x[3 + i]
        pid[i] = kp[i] * e_x[i] + kd[i] * e_v[i] + ki[i] * integral[i] + des[6 + i]
        delta[i] = x[i] - x[13 + i]
    d = sqrt(_d3(delta, delta))
    if d == 0.0:
        return C_ERR_DEGENERATE
    _qrot(&x[19], r)
    for i in range(3):
        xi[i] = delta[i] / d
        xidot[i] = (x[3 + i] - x[16 + i]) / l
    xidot2 = _d3(xidot, xidot)
    for i in range(3):
        f_des[i] = (m + m_l) * pid[i] + (m * l * xidot2) * xi[i]
    f_des[2] += (m + m_l) * GRAV_C
    nf = sqrt(_d3(f_des, f_des))
    if nf < 1e-12:
        return C_ERR_ZERO_FORCE
    for i in range(3):
        xi_des[i] = -f_des[i] / nf
        out_xi_des[0, i] = xi_des[i]

    if taut[0] != 0:
        _cross(xi_des, xi, e_xi)
        _cross(xi, xidot, omc)
        _cross(xi, &om_ff[0, 0], tmp)
        _cross(xi, tmp, tmp2)
        for i in range(3):
            e_omc[i] = omc[i] + tmp2[i]
            tmp[i] = kxi[i] * e_xi[i] + kw[i] * e_omc[i] \
                + _d3(xi, &om_ff[0, 0]) * xidot[i]
        _cross(xi, tmp, tmp2)
        for i in range(3):
            fvec[i] = _d3(xi, f_des) * xi[i] - (m * l) * tmp2[i]
        _cross(xi, &dom_ff[0, 0], tmp)
        for i in range(3):
            fvec[i] = fvec[i] + (m * l) * tmp[i]
    else:
        for i in range(3):
            target[i] = des[i] - l * xi_des[i]
            fvec[i] = m * (kp[i] * (target[i] - x[13 + i])
                           + kd[i] * (des[3 + i] - x[16 + i]) + des[6 + i])
        fvec[2] += m * GRAV_C

    nfv = sqrt(_d3(fvec, fvec))
    if nfv < 1e-12:
        return C_ERR_ZERO_FORCE
    out_u[0] = fvec[0] * r[2] + fvec[1] * r[5] + fvec[2] * r[8]
    for i in range(3):
        tmp[i] = fvec[i] / nfv
    _att_moment(r, &x[23], tmp, yaw_des[0], kr, kom, jd, &out_u[1])
    if not _finite(&out_u[0], 4):
        return C_ERR_NONFINITE
    return C_OK


def multi_cable_control(double[::1] out_u, double[:, ::1] out_xi_des,
                        double[::1] x, const unsigned char[::1] taut,
                        double[::1] des, double[::1] yaw_des,
                        double[::1] integral, double[:, ::1] om_ff,
                        double[:, ::1] dom_ff, double[::1] gains,
                        double[::1] params):
    cdef int n = <int>params[0]
    cdef double m_l = params[1]
    cdef const double* j_l = &params[2]
    cdef const double* pinv = &params[CHDR + CRSTRIDE * n]
    cdef const double* kp = &gains[0]
    cdef const double* kd = &gains[3]
    cdef const double* ki = &gains[6]
    cdef const double* kr = &gains[9]
    cdef const double* kom = &gains[12]
    cdef const double* kxi = &gains[15]
    cdef const double* kw = &gains[18]
    cdef const double* krl = &gains[21]
    cdef const double* koml = &gains[24]
    cdef double r_l[9]
    cdef double r_des[9]
    cdef double r_k[9]
    cdef double e_x[3]
    cdef double e_v[3]
    cdef double acc_cmd[3]
    cdef double f_des[3]
    cdef double t1[3]
    cdef double e_rl[3]
    cdef double m_des[3]
    cdef double wrench[6]
    cdef double mrel[9]
    cdef double jt1[3]
    cdef double tmp[3]
    cdef double tmp2[3]
    cdef double tmp3[3]
    cdef double mu_k[3]
    cdef double xi_des[3]
    cdef double pk[3]
    cdef double pdot[3]
    cdef double delta[3]
    cdef double xi[3]
    cdef double xidot[3]
    cdef double omc[3]
    cdef double a_c[3]
    cdef double u_vec[3]
    cdef double e_xi[3]
    cdef double e_omc[3]
    cdef double target[3]
    cdef double vt[3]
    cdef double nmu, d, nuv, m, l, w2
    cdef const double* rb
    cdef const double* rho
    cdef int i, j, k, base

    if n > MAXN:
        return C_ERR_TOO_LARGE
    _qrot(&x[6], r_l)
    _qrot(&des[9], r_des)
    for i in range(3):
        e_x[i] = des[i] - x[i]
        e_v[i] = des[3 + i] - x[3 + i]
        acc_cmd[i] = kp[i] * e_x[i] + kd[i] * e_v[i] + ki[i] * integral[i] + des[6 + i]
        f_des[i] = m_l * acc_cmd[i]
    f_des[2] += m_l * GRAV_C

    _mv3(r_des, &des[13], tmp)
    _mtv3(r_l, tmp, t1)
    # mrel = r_l^T r_des
    for i in range(3):
        for j in range(3):
            mrel[3 * i + j] = (r_l[0 + i] * r_des[0 + j] + r_l[3 + i] * r_des[3 + j]
                               + r_l[6 + i] * r_des[6 + j])
    e_rl[0] = 0.5 * (mrel[3 * 2 + 1] - mrel[3 * 1 + 2])
    e_rl[1] = 0.5 * (mrel[3 * 0 + 2] - mrel[3 * 2 + 0])
    e_rl[2] = 0.5 * (mrel[3 * 1 + 0] - mrel[3 * 0 + 1])
    _mv3(r_des, &des[16], tmp)
    _mtv3(r_l, tmp, tmp2)
    _mv3(j_l, tmp2, tmp)        # J_L R_L^T R_des domdes
    _mv3(j_l, t1, jt1)
    _cross(t1, jt1, tmp2)
    for i in range(3):
        m_des[i] = krl[i] * e_rl[i] + koml[i] * (t1[i] - x[10 + i]) + tmp[i] + tmp2[i]

    _mtv3(r_l, f_des, wrench)
    for i in range(3):
        wrench[3 + i] = m_des[i]

    for k in range(n):
        rb = &params[CHDR + CRSTRIDE * k]
        m = rb[0]
        l = rb[4]
        rho = rb + 5
        base = 13 + 13 * k
        # mu_k = R_L (pinvP rows for k) @ wrench
        for i in range(3):
            tmp[i] = 0.0
            for j in range(6):
                tmp[i] += pinv[(3 * k + i) * 6 + j] * wrench[j]
        _mv3(r_l, tmp, mu_k)
        nmu = sqrt(_d3(mu_k, mu_k))
        if nmu < 1e-12:
            return C_ERR_ZERO_FORCE
        for i in range(3):
            xi_des[i] = -mu_k[i] / nmu
            out_xi_des[k, i] = xi_des[i]

        if taut[k] != 0:
            _mv3(r_l, rho, tmp)
            _cross(&x[10], rho, tmp2)
            _mv3(r_l, tmp2, tmp3)
            for i in range(3):
                pk[i] = x[i] + tmp[i]
                pdot[i] = x[3 + i] + tmp3[i]
                delta[i] = pk[i] - x[base + i]
            d = sqrt(_d3(delta, delta))
            if d == 0.0:
                return C_ERR_DEGENERATE
            for i in range(3):
                xi[i] = delta[i] / d
                xidot[i] = (pdot[i] - x[base + 3 + i]) / l
            _cross(xi, xidot, omc)
            _cross(&x[10], rho, tmp)
            _cross(&x[10], tmp, tmp2)
            _mv3(r_l, tmp2, tmp)
            for i in range(3):
                a_c[i] = acc_cmd[i] + tmp[i]
            a_c[2] += GRAV_C
            w2 = _d3(omc, omc)
            for i in range(3):
                u_vec[i] = (_d3(xi, mu_k) + m * l * w2 + m * _d3(xi, a_c)) * xi[i]
            _cross(xi_des, xi, e_xi)
            _cross(xi, &om_ff[k, 0], tmp)
            _cross(xi, tmp, tmp2)
            for i in range(3):
                e_omc[i] = omc[i] + tmp2[i]
                tmp[i] = kxi[i] * e_xi[i] + kw[i] * e_omc[i] \
                    + _d3(xi, &om_ff[k, 0]) * xidot[i]
            _cross(xi, tmp, tmp2)
            for i in range(3):
                u_vec[i] = u_vec[i] - (m * l) * tmp2[i]
            _cross(xi, &dom_ff[k, 0], tmp)
            _cross(xi, a_c, tmp2)
            _cross(xi, tmp2, tmp3)
            for i in range(3):
                u_vec[i] = u_vec[i] + (m * l) * tmp[i] - m * tmp3[i]
        else:
            _mv3(r_des, rho, tmp)
            _cross(&des[13], rho, tmp2)
            _mv3(r_des, tmp2, tmp3)
            for i in range(3):
                target[i] = des[i] + tmp[i] - l * xi_des[i]
                vt[i] = des[3 + i] + tmp3[i]
                u_vec[i] = m * (kp[i] * (target[i] - x[base + i])
                                + kd[i] * (vt[i] - x[base + 3 + i]) + des[6 + i])
            u_vec[2] += m * GRAV_C

        nuv = sqrt(_d3(u_vec, u_vec))
        if nuv < 1e-12:
            return C_ERR_ZERO_FORCE
        _qrot(&x[base + 6], r_k)
        out_u[4 * k] = u_vec[0] * r_k[2] + u_vec[1] * r_k[5] + u_vec[2] * r_k[8]
        for i in range(3):
            tmp[i] = u_vec[i] / nuv
        _att_moment(r_k, &x[base + 10], tmp, yaw_des[k], kr, kom, rb + 1,
                    &out_u[4 * k + 1])

    if not _finite(&out_u[0], 4 * n):
        return C_ERR_NONFINITE
    return C_OK
