"""Small SO(3) toolbox shared by the kinematics, control and simulation code.

Everything operates on plain float64 numpy arrays. Rotation matrices map
local-frame coordinates to parent-frame coordinates (column convention).
"""
from __future__ import annotations

import numpy as np


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix: skew(v) @ u == cross(v, u)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m: np.ndarray) -> np.ndarray:
    """Inverse of skew for an antisymmetric matrix."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of two 3-vectors without np.cross dispatch overhead."""
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def rot_x(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def exp_so3(w: np.ndarray) -> np.ndarray:
    """Rodrigues formula, series-expanded near zero to stay exact in float64."""
    a = float(np.linalg.norm(w))
    k = skew(w)
    if a < 1e-8:
        # sin(a)/a ~ 1 - a^2/6, (1-cos(a))/a^2 ~ 1/2 - a^2/24
        return np.eye(3) + (1.0 - a * a / 6.0) * k + (0.5 - a * a / 24.0) * (k @ k)
    return np.eye(3) + (np.sin(a) / a) * k + ((1.0 - np.cos(a)) / (a * a)) * (k @ k)


def orthonormalize(r: np.ndarray) -> np.ndarray:
    """One Newton step toward the polar factor; removes integrator drift.

    For nearly orthonormal input the defect shrinks quadratically, which is
    plenty when called once per integration step.
    """
    return r @ (1.5 * np.eye(3) - 0.5 * (r.T @ r))


def polar_orthonormalize(r: np.ndarray) -> np.ndarray:
    """Exact nearest rotation via SVD (slower; for initialization and tests)."""
    u, _, vt = np.linalg.svd(r)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    if np.ndim(a) == 0:
        return float(w)
    return w


def rpy_from_matrix(r: np.ndarray) -> np.ndarray:
    """Roll-pitch-yaw (x-y-z intrinsic) angles of a rotation matrix."""
    pitch = np.arcsin(np.clip(-r[2, 0], -1.0, 1.0))
    roll = np.arctan2(r[2, 1], r[2, 2])
    yaw = np.arctan2(r[1, 0], r[0, 0])
    return np.array([roll, pitch, yaw])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation (quaternion method)."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
