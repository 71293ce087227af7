"""Rotation, quaternion and unit-sphere utilities.

Conventions used across the whole package:

* Quaternions are ``[w, x, y, z]`` (scalar first) Hamilton quaternions.
* ``quat_to_rot(q)`` maps body-frame vectors into the world frame.
* Body angular rates enter on the right: ``qdot = 0.5 * q (x) (0, omega)``,
  which is consistent with ``Rdot = R hat(omega)``.

All functions are pure and operate on plain ndarrays, so they are safe to
call from any thread.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericError

# Default tolerances; callers may pass their own where it matters.
UNIT_TOL = 1e-9
SKEW_TOL = 1e-9

E3 = np.array([0.0, 0.0, 1.0])


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric cross-product matrix: hat(v) @ w == cross(v, w)."""
    x, y, z = v
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])


def vee(m: np.ndarray, tol: float = SKEW_TOL) -> np.ndarray:
    """Inverse of :func:`hat`.  Rejects inputs that are not skew-symmetric."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise NumericError(f"vee expects a 3x3 matrix, got shape {m.shape}")
    asym = np.abs(m + m.T).max()
    if asym > tol:
        raise NumericError(f"vee input is not skew-symmetric (|M + M^T| = {asym:.3e})")
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a (x) b, both [w, x, y, z]."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = math.sqrt(float(np.dot(q, q)))
    if n == 0.0:
        raise NumericError("cannot normalize a zero quaternion")
    return np.asarray(q, dtype=float) / n


def quat_derivative(q: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Rate of a unit quaternion under body angular velocity ``omega``.

    Returns ``0.5 * q (x) (0, omega)``; the result is tangent to the unit
    sphere, so integrating it preserves the norm to first order.
    """
    return 0.5 * quat_multiply(q, np.array([0.0, omega[0], omega[1], omega[2]]))


def quat_exp_tangent(sigma: np.ndarray) -> np.ndarray:
    """Unit quaternion for a rotation of angle ``|sigma|`` about ``sigma``."""
    angle = math.sqrt(float(np.dot(sigma, sigma)))
    if angle < 1e-12:
        # First-order expansion; renormalized below for safety.
        q = np.array([1.0, 0.5 * sigma[0], 0.5 * sigma[1], 0.5 * sigma[2]])
        return quat_normalize(q)
    axis = np.asarray(sigma, dtype=float) / angle
    half = 0.5 * angle
    s = math.sin(half)
    return np.array([math.cos(half), s * axis[0], s * axis[1], s * axis[2]])


def quat_boxplus(q: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Perturb ``q`` by a tangent-space vector: ``q (x) exp(sigma / 2)``.

    ``quat_boxplus(q, 0) == q`` and the result is always unit norm.
    """
    if sigma[0] == 0.0 and sigma[1] == 0.0 and sigma[2] == 0.0:
        return np.asarray(q, dtype=float).copy()
    return quat_normalize(quat_multiply(q, quat_exp_tangent(sigma)))


def quat_to_rot(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion (body frame -> world frame)."""
    w, x, y, z = q
    return np.array([
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ])


def rotation_angle(q: np.ndarray) -> float:
    """Rotation angle in radians represented by a unit quaternion."""
    w = min(1.0, max(-1.0, abs(float(q[0]))))
    return 2.0 * math.acos(w)


def check_rotation(r: np.ndarray, tol: float = UNIT_TOL) -> None:
    """Raise unless ``r`` is in SO(3) within ``tol``."""
    err_orth = np.abs(r.T @ r - np.eye(3)).max()
    if err_orth > tol:
        raise NumericError(f"matrix is not orthonormal (|R^T R - I| = {err_orth:.3e})")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise NumericError("matrix has determinant != +1")


def quat_to_euler_zyx(q: np.ndarray) -> tuple[float, float, float]:
    """ZYX Euler angles (roll, pitch, yaw) of a unit quaternion, radians."""
    w, x, y, z = q
    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    sinp = 2.0 * (w * y - z * x)
    sinp = min(1.0, max(-1.0, sinp))
    pitch = math.asin(sinp)
    yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return roll, pitch, yaw
