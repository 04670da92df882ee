"""Minimal quaternion helpers.

Conventions:
    - Quaternions are float64 arrays [w, x, y, z], unit length.
    - Angles in radians; rotation vectors are axis * angle.
    - quat_rotate applies the rotation to column vectors (world frame).
"""

from __future__ import annotations

import numpy as np

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero quaternion")
    return q / n


def quat_multiply(a, b):
    """Hamilton product a * b (apply b first, then a)."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q, v):
    """Rotate 3-vector v by quaternion q."""
    w = q[0]
    xyz = np.asarray(q[1:], dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    t = 2.0 * np.cross(xyz, v)
    return v + w * t + np.cross(xyz, t)


def quat_from_rotvec(rv):
    """Exponential map: rotation vector (axis * angle) to quaternion."""
    rv = np.asarray(rv, dtype=np.float64)
    angle = np.linalg.norm(rv)
    if angle < 1e-300:
        return IDENTITY.copy()
    axis = rv / angle
    half = 0.5 * angle
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def quat_to_rotvec(q):
    """Logarithm map: quaternion to rotation vector with angle in [0, pi]."""
    q = quat_normalize(q)
    if q[0] < 0.0:  # the two quaternion signs encode the same rotation
        q = -q
    sin_half = np.linalg.norm(q[1:])
    if sin_half < 1e-300:
        return np.zeros(3)
    angle = 2.0 * np.arctan2(sin_half, q[0])
    return (angle / sin_half) * q[1:]


def quat_between(a, b):
    """Minimal rotation taking unit vector a onto unit vector b.

    Antiparallel inputs rotate 180 degrees about a deterministic axis
    perpendicular to a.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    d = float(np.dot(a, b))
    if d < -1.0 + 1e-12:
        perp = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(a, [0.0, 1.0, 0.0])
        perp = perp / np.linalg.norm(perp)
        return np.concatenate([[0.0], perp])
    c = np.cross(a, b)
    return quat_normalize(np.concatenate([[1.0 + d], c]))
