"""Desk-scale physics for the vectored-rotor quadruped.

The body is integrated as a single rigid body at the whole-body CoG
(semi-implicit Euler, exponential-map attitude update), which is exact while
the joints are still and a good approximation at the slow joint speeds the
hardware allows. Joints and vectoring gimbals are modeled as rate-limited
first-order position servos; thrusts as first-order lags. Ground contact is
a penalty spring-damper with capped viscous friction acting on the foot
spheres.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (FrameSet, RobotDescription, RobotState, cog_jacobian,
                    cog_state, forward_kinematics, jacobian, point_world_velocity,
                    total_inertia)
from .rotations import cross3, exp_so3, orthonormalize, wrap_angle
from .thrust import allocation_matrix


class SimDivergenceError(RuntimeError):
    """The integrator left the sane envelope (NaN or runaway state)."""


@dataclass
class SimConfig:
    """Physics and actuator parameters (SI units)."""

    timestep: float = 1e-3
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -9.8]))
    ground_stiffness: float = 40000.0     # N/m
    ground_damping: float = 800.0         # N s/m
    friction: float = 0.4
    tangential_stiffness: float = 8000.0  # N/m toward the stick anchor
    tangential_damping: float = 2000.0    # N s/m while sliding
    thrust_lag: float = 0.05              # s
    servo_lag: float = 0.03               # s
    pos_noise: float = 0.0                # m, std dev per axis
    vel_noise: float = 0.0
    att_noise: float = 0.0                # rad
    omega_noise: float = 0.0
    divergence_position: float = 100.0    # m
    divergence_speed: float = 100.0       # m/s or rad/s

    def __post_init__(self) -> None:
        self.gravity = np.asarray(self.gravity, dtype=float)
        if self.timestep <= 0:
            raise ValueError("timestep must be positive")
        if self.ground_stiffness < 0 or self.ground_damping < 0:
            raise ValueError("ground parameters must be non-negative")


@dataclass
class ActuatorCommand:
    """Targets handed to the actuators for one control interval.

    ``joint_torque_ff`` is carried along for logging; the joints themselves
    are position servos, so it never enters the physics.
    """

    thrust_des: np.ndarray                # (8,) N
    roll_des: np.ndarray                  # (8,) rad
    pitch_des: np.ndarray                 # (8,) rad
    joint_des: np.ndarray                 # (16,) rad
    joint_torque_ff: np.ndarray | None = None

    @classmethod
    def hold(cls, state: RobotState) -> "ActuatorCommand":
        return cls(
            thrust_des=state.thrusts.copy(),
            roll_des=state.vectoring_roll.copy(),
            pitch_des=state.vectoring_pitch.copy(),
            joint_des=state.joint_angles.copy(),
        )


@dataclass
class StepDiagnostics:
    contact_forces: np.ndarray            # (4, 3) world frame
    thrust_wrench: np.ndarray             # (6,) CoG frame
    cog_pos: np.ndarray                   # (3,) world
    cog_vel: np.ndarray                   # (3,) world
    frames_next: FrameSet | None = None   # FK of the returned state, reusable


def contact_forces(desc: RobotDescription, frames: FrameSet, state: RobotState,
                   cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """World-frame ground reaction on each foot sphere.

    Returns the (4, 3) force array together with updated stick anchors.
    Normal load is a unilateral spring-damper on the sphere bottom. The
    tangential load sticks: a spring-damper pulls the foot toward a per-foot
    anchor remembered from touchdown, capped at the friction cone; once the
    cone saturates the anchor is dragged along so the foot slides at the cap.
    A zero ``tangential_stiffness`` falls back to purely viscous friction.
    """
    out = np.zeros((desc.n_legs, 3))
    feet_w = frames.foot_pos_world()
    k_t = cfg.tangential_stiffness
    anchors = (feet_w[:, :2].copy() if state.foot_anchor is None
               else state.foot_anchor.copy())
    for leg in range(desc.n_legs):
        pen = desc.foot_radius - feet_w[leg, 2]
        if pen <= 0.0:
            anchors[leg] = feet_w[leg, :2]
            continue
        vel = point_world_velocity(frames, state, frames.foot_pos[leg],
                                   jacobian(desc, frames, "foot", leg))
        normal = cfg.ground_stiffness * pen - cfg.ground_damping * vel[2]
        if normal <= 0.0:
            anchors[leg] = feet_w[leg, :2]
            continue
        tangent = -cfg.tangential_damping * vel[:2]
        if k_t > 0.0:
            tangent = tangent - k_t * (feet_w[leg, :2] - anchors[leg])
        shear = float(np.hypot(tangent[0], tangent[1]))
        cap = cfg.friction * normal
        if shear > cap:
            tangent *= cap / shear
            if k_t > 0.0:
                anchors[leg] = feet_w[leg, :2] + tangent / k_t
        out[leg] = (tangent[0], tangent[1], normal)
    return out, anchors


def _servo(value: np.ndarray, target: np.ndarray, lag: float, rate: float,
           dt: float, wrap: bool = False) -> np.ndarray:
    err = target - value
    if wrap:
        err = wrap_angle(err)
    speed = np.clip(err / lag, -rate, rate)
    return value + speed * dt


def _check_sane(state: RobotState, cfg: SimConfig) -> None:
    vals = np.concatenate([state.base_position, state.base_lin_vel,
                           state.base_ang_vel, state.joint_angles,
                           state.thrusts])
    if not np.all(np.isfinite(vals)):
        raise SimDivergenceError("non-finite state (NaN/inf) in integrator")
    if np.max(np.abs(state.base_position)) > cfg.divergence_position:
        raise SimDivergenceError(
            f"position {np.round(state.base_position, 2)} left the "
            f"+/-{cfg.divergence_position:.0f} m envelope")
    speed = max(float(np.max(np.abs(state.base_lin_vel))),
                float(np.max(np.abs(state.base_ang_vel))))
    if speed > cfg.divergence_speed:
        raise SimDivergenceError(f"speed {speed:.1f} exceeds "
                                 f"{cfg.divergence_speed:.0f}")


def step(desc: RobotDescription, state: RobotState, cmd: ActuatorCommand,
         cfg: SimConfig, frames: FrameSet | None = None
         ) -> tuple[RobotState, StepDiagnostics]:
    """Advance the world by one physics timestep.

    Returns the new state plus the forces that acted during the step. The
    incoming state is not modified. ``frames`` may carry a FrameSet already
    computed for exactly this state (e.g. the previous step's
    ``frames_next``) to skip one forward-kinematics pass.
    """
    dt = cfg.timestep
    if frames is None:
        frames = forward_kinematics(desc, state, check_limits=False)
    mass = desc.total_mass

    fc, anchors2 = contact_forces(desc, frames, state, cfg)
    w_thrust = allocation_matrix(frames) @ state.thrusts
    rot = state.base_rotation

    force_w = rot @ w_thrust[:3] + mass * cfg.gravity + fc.sum(axis=0)
    torque_b = w_thrust[3:].copy()
    feet_cog = frames.foot_pos_cog()
    for leg in range(desc.n_legs):
        if np.any(fc[leg]):
            torque_b += cross3(feet_cog[leg], rot.T @ fc[leg])

    inertia = total_inertia(desc, frames)
    omega = state.base_ang_vel
    omega_dot = np.linalg.solve(inertia, torque_b - cross3(omega, inertia @ omega))

    r_c, v_c = cog_state(desc, frames, state)
    v_c2 = v_c + dt * (force_w / mass)
    r_c2 = r_c + dt * v_c2
    omega2 = omega + dt * omega_dot
    rot2 = orthonormalize(rot @ exp_so3(omega2 * dt))

    # actuators
    q2 = _servo(state.joint_angles, cmd.joint_des, cfg.servo_lag,
                desc.max_joint_speed, dt)
    roll2 = _servo(state.vectoring_roll, cmd.roll_des, cfg.servo_lag,
                   desc.max_vectoring_speed, dt, wrap=True)
    pitch2 = _servo(state.vectoring_pitch, cmd.pitch_des, cfg.servo_lag,
                    desc.max_vectoring_speed, dt)
    thrust2 = state.thrusts + (dt / cfg.thrust_lag) * (cmd.thrust_des - state.thrusts)
    thrust2 = np.clip(thrust2, 0.0, desc.max_thrust)
    q_vel2 = (q2 - state.joint_angles) / dt

    # recover the base pose from the CoG state at the new configuration
    probe = RobotState(
        base_position=np.zeros(3), base_rotation=np.eye(3),
        base_lin_vel=np.zeros(3), base_ang_vel=np.zeros(3),
        joint_angles=q2, joint_velocities=q_vel2,
        vectoring_roll=roll2, vectoring_pitch=pitch2, thrusts=thrust2,
    )
    frames2 = forward_kinematics(desc, probe, check_limits=False)
    cog_b = frames2.cog
    base_pos2 = r_c2 - rot2 @ cog_b
    base_vel2 = v_c2 - rot2 @ (cross3(omega2, cog_b)
                               + cog_jacobian(desc, frames2) @ q_vel2)

    new_state = RobotState(
        base_position=base_pos2, base_rotation=rot2,
        base_lin_vel=base_vel2, base_ang_vel=omega2,
        joint_angles=q2, joint_velocities=q_vel2,
        vectoring_roll=roll2, vectoring_pitch=pitch2, thrusts=thrust2,
        contacts=state.contacts, foot_anchor=anchors2,
    )
    _check_sane(new_state, cfg)
    # frames2 was computed at the new joint configuration with an identity
    # base; patch in the true base pose so it is the FK of new_state
    frames2.base_position = base_pos2
    frames2.base_rotation = rot2
    diag = StepDiagnostics(contact_forces=fc, thrust_wrench=w_thrust,
                           cog_pos=r_c, cog_vel=v_c, frames_next=frames2)
    return new_state, diag


def sensed_state(state: RobotState, cfg: SimConfig,
                 rng: np.random.Generator | None) -> RobotState:
    """What the controller sees; identical to truth at zero noise."""
    if rng is None or (cfg.pos_noise == 0 and cfg.vel_noise == 0
                       and cfg.att_noise == 0 and cfg.omega_noise == 0):
        return state
    noisy = state.copy()
    noisy.base_position = state.base_position + rng.normal(0, cfg.pos_noise, 3)
    noisy.base_lin_vel = state.base_lin_vel + rng.normal(0, cfg.vel_noise, 3)
    noisy.base_rotation = orthonormalize(
        state.base_rotation @ exp_so3(rng.normal(0, cfg.att_noise, 3)))
    noisy.base_ang_vel = state.base_ang_vel + rng.normal(0, cfg.omega_noise, 3)
    return noisy


def mechanical_energy(desc: RobotDescription, state: RobotState,
                      gravity: np.ndarray) -> float:
    """Kinetic plus potential energy of the frozen-joint rigid body."""
    frames = forward_kinematics(desc, state, check_limits=False)
    r_c, v_c = cog_state(desc, frames, state)
    inertia = total_inertia(desc, frames)
    omega = state.base_ang_vel
    kinetic = 0.5 * desc.total_mass * float(v_c @ v_c) \
        + 0.5 * float(omega @ inertia @ omega)
    potential = -desc.total_mass * float(gravity @ r_c)
    return kinetic + potential
