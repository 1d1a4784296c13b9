"""Centroidal pose controllers and the per-joint position servo law.

The position loop is a PID on the CoG position whose output is expressed in
body axes and augmented with gravity and contact feedforward; the attitude
loop is a PID on the SO(3) error with gyroscopic and contact-moment
feedforward. Both assume quasi-static joints: whole-body inertia enters as a
gain, not as coupled dynamics.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rotations import vee


@dataclass
class WrenchCommand:
    """Desired CoG wrench in body axes."""

    force: np.ndarray
    torque: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])


def _diag3(x, y, z) -> np.ndarray:
    return np.array([x, y, z], dtype=float)


@dataclass
class ControlGains:
    """Loop gains; defaults are the flight-tested set for the 15.2 kg vehicle.

    Integral states are clamped elementwise: the position integral so its
    force term cannot exceed one body weight per axis, the attitude integral
    to ``att_int_limit`` (rad*s).
    """

    pos_p: np.ndarray = field(default_factory=lambda: _diag3(3.6, 3.6, 2.8))
    pos_i: np.ndarray = field(default_factory=lambda: _diag3(0.03, 0.03, 1.2))
    pos_d: np.ndarray = field(default_factory=lambda: _diag3(4.0, 4.0, 2.8))
    att_p: np.ndarray = field(default_factory=lambda: _diag3(15.0, 15.0, 10.0))
    att_i: np.ndarray = field(default_factory=lambda: _diag3(0.3, 0.3, 0.1))
    att_d: np.ndarray = field(default_factory=lambda: _diag3(5.0, 5.0, 5.0))
    joint_p: float = 40.0
    joint_d: float = 2.0
    altitude_p: float = 25.0
    att_int_limit: np.ndarray = field(default_factory=lambda: _diag3(1.0, 1.0, 1.0))


def attitude_error(rot: np.ndarray, rot_des: np.ndarray) -> np.ndarray:
    """SO(3) attitude error 0.5 * vee(R^T Rd - Rd^T R), body axes."""
    return 0.5 * vee(rot.T @ rot_des - rot_des.T @ rot)


def omega_error(rot: np.ndarray, rot_des: np.ndarray, omega: np.ndarray,
                omega_des: np.ndarray) -> np.ndarray:
    """Body-rate error with the desired rate mapped into the current frame."""
    return rot.T @ rot_des @ omega_des - omega


class PositionController:
    """PID on CoG position with gravity and contact feedforward.

    update() returns the desired thrust force in body axes:
    m*R^T*(Kp e + Ki ∫e + Kd de) + R^T*(weight - sum of contact forces).
    """

    def __init__(self, gains: ControlGains, mass: float,
                 gravity: np.ndarray | None = None) -> None:
        self.gains = gains
        self.mass = float(mass)
        g = np.array([0.0, 0.0, -9.8]) if gravity is None else np.asarray(gravity)
        self.weight = -self.mass * g  # upward force that cancels gravity
        # cap the integral so its force term stays within one body weight
        with np.errstate(divide="ignore"):
            self.int_limit = np.where(
                gains.pos_i > 0.0, 9.8 / np.maximum(gains.pos_i, 1e-12), np.inf
            )
        self.reset()

    def reset(self) -> None:
        self.integral = np.zeros(3)

    def update(self, pos: np.ndarray, vel: np.ndarray, rot: np.ndarray,
               pos_des: np.ndarray, vel_des: np.ndarray,
               contact_force_sum: np.ndarray, dt: float) -> np.ndarray:
        g = self.gains
        err = pos_des - pos
        self.integral = np.clip(self.integral + err * dt,
                                -self.int_limit, self.int_limit)
        accel = g.pos_p * err + g.pos_i * self.integral + g.pos_d * (vel_des - vel)
        return self.mass * (rot.T @ accel) + rot.T @ (self.weight - contact_force_sum)


class AttitudeController:
    """PID on the SO(3) error with gyroscopic and contact-moment feedforward."""

    def __init__(self, gains: ControlGains) -> None:
        self.gains = gains
        self.reset()

    def reset(self) -> None:
        self.integral = np.zeros(3)

    def update(self, rot: np.ndarray, rot_des: np.ndarray, omega: np.ndarray,
               omega_des: np.ndarray, inertia: np.ndarray,
               contact_moment: np.ndarray, dt: float) -> np.ndarray:
        g = self.gains
        e_rot = attitude_error(rot, rot_des)
        e_om = omega_error(rot, rot_des, omega, omega_des)
        self.integral = np.clip(self.integral + e_rot * dt,
                                -g.att_int_limit, g.att_int_limit)
        pid = g.att_p * e_rot + g.att_i * self.integral + g.att_d * e_om
        return inertia @ pid + np.cross(omega, inertia @ omega) - contact_moment


def contact_moment(rot: np.ndarray, foot_pos_cog: np.ndarray,
                   contact_forces_world: np.ndarray) -> np.ndarray:
    """Sum of p_c x R^T f_c over standing feet (body axes)."""
    if len(contact_forces_world) == 0:
        return np.zeros(3)
    body_forces = contact_forces_world @ rot
    return np.cross(foot_pos_cog, body_forces).sum(axis=0)


def joint_pd(q_des: np.ndarray, q: np.ndarray, q_vel: np.ndarray,
             kp: float, kd: float, torque_limit: float) -> np.ndarray:
    """Per-joint servo law kp*(qd - q) - kd*qv, clamped to the torque limit."""
    return np.clip(kp * (q_des - q) - kd * q_vel, -torque_limit, torque_limit)
