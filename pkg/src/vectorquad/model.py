"""Rigid-body model of the vectored-rotor quadruped.

The robot is a center torso with four point-symmetric legs. Each leg is two
rod links joined by identical two-axis (yaw then pitch) joint modules, one at
the hip and one at the knee, giving 16 joints. Every link carries a dual-rotor
module halfway along the rod that can vector its combined thrust through a
roll angle about the rod (phi) and a pitch angle across the rotor pair
(theta), giving 8 spherically vectorable thrust units.

Conventions used throughout:

* The baselink frame sits at the torso center, x forward, z up. The CoG frame
  shares the baselink axes and has its origin at the whole-body center of
  gravity, so positions "in the CoG frame" are baselink-frame positions minus
  the CoG offset.
* Rotation matrices map local coordinates into the parent frame.
* Leg k attaches at angle leg_angles[k] from +x; joints are ordered
  (hip yaw, hip pitch, knee yaw, knee pitch) so joint 4k+j belongs to leg k.
* Link 2k is the inner (hip-side) link of leg k, link 2k+1 the outer one, and
  rotor i rides on link i.
* Positive pitch rotates the link tip downward (about the local +y axis), so
  a standing pose has a negative hip pitch (thigh raised) and a positive knee
  pitch (shank dropped).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rotations import cross3, rot_x, rot_y, rot_z, skew

Z_AXIS = np.array([0.0, 0.0, 1.0])


class JointLimitError(ValueError):
    """A joint angle is outside its configured range."""


@dataclass(frozen=True)
class RobotDescription:
    """Geometry, mass and actuation limits of the robot.

    Defaults reproduce the reference vehicle: total mass 15.2 kg, full
    leg-to-leg span 2.7 m, per-unit thrust limit 42 N.
    """

    link_length: float = 0.54
    torso_half_width: float = 0.27
    torso_mass: float = 4.0
    torso_size: tuple[float, float, float] = (0.40, 0.40, 0.15)
    link_rod_mass: float = 0.6
    rotor_module_mass: float = 0.8
    rod_radius: float = 0.02
    rotor_offset: float = 0.27
    vectoring_axis_offset: float = 0.005
    foot_radius: float = 0.02
    joint_limit: float = np.pi / 2
    max_thrust: float = 42.0
    max_joint_torque: float = 6.5
    max_joint_speed: float = 0.34
    max_vectoring_speed: float = 4.2
    leg_angles: tuple[float, float, float, float] = (
        np.pi / 4,
        -np.pi / 4,
        -3 * np.pi / 4,
        3 * np.pi / 4,
    )

    n_legs: int = field(init=False, default=4)
    n_links: int = field(init=False, default=8)
    n_rotors: int = field(init=False, default=8)
    n_joints: int = field(init=False, default=16)
    n_segments: int = field(init=False, default=9)

    def __post_init__(self) -> None:
        for name in (
            "link_length",
            "torso_half_width",
            "torso_mass",
            "link_rod_mass",
            "rotor_module_mass",
            "max_thrust",
            "max_joint_torque",
            "max_joint_speed",
            "max_vectoring_speed",
        ):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.rotor_offset <= self.link_length:
            raise ValueError("rotor_offset must lie on the link")

    @property
    def link_mass(self) -> float:
        return self.link_rod_mass + self.rotor_module_mass

    @property
    def total_mass(self) -> float:
        return self.torso_mass + self.n_links * self.link_mass

    def joint_name(self, j: int) -> str:
        leg, sub = divmod(j, 4)
        return f"leg{leg}_" + ("hip_yaw", "hip_pitch", "knee_yaw", "knee_pitch")[sub]

    def leg_joints(self, leg: int) -> slice:
        return slice(4 * leg, 4 * leg + 4)

    def link_joint_ids(self, link: int) -> list[int]:
        """Joints between the baselink and the given link."""
        leg, inner = divmod(link, 2)
        return list(range(4 * leg, 4 * leg + (2 if inner == 0 else 4)))

    @property
    def inner_rotors(self) -> tuple[int, ...]:
        return tuple(range(0, self.n_rotors, 2))


@dataclass
class RobotState:
    """Snapshot of the full robot state as seen by the controller.

    Pose fields are world frame; angular velocity is body frame. ``contacts``
    lists the legs currently considered standing.
    """

    base_position: np.ndarray
    base_rotation: np.ndarray
    base_lin_vel: np.ndarray
    base_ang_vel: np.ndarray
    joint_angles: np.ndarray
    joint_velocities: np.ndarray
    vectoring_roll: np.ndarray
    vectoring_pitch: np.ndarray
    thrusts: np.ndarray
    contacts: tuple[int, ...] = ()
    foot_anchor: np.ndarray | None = None   # (4, 2) ground stick points

    @classmethod
    def rest(cls, desc: RobotDescription, height: float = 0.0) -> "RobotState":
        return cls(
            base_position=np.array([0.0, 0.0, height]),
            base_rotation=np.eye(3),
            base_lin_vel=np.zeros(3),
            base_ang_vel=np.zeros(3),
            joint_angles=np.zeros(desc.n_joints),
            joint_velocities=np.zeros(desc.n_joints),
            vectoring_roll=np.zeros(desc.n_rotors),
            vectoring_pitch=np.zeros(desc.n_rotors),
            thrusts=np.zeros(desc.n_rotors),
            contacts=(),
        )

    def copy(self) -> "RobotState":
        return RobotState(
            self.base_position.copy(),
            self.base_rotation.copy(),
            self.base_lin_vel.copy(),
            self.base_ang_vel.copy(),
            self.joint_angles.copy(),
            self.joint_velocities.copy(),
            self.vectoring_roll.copy(),
            self.vectoring_pitch.copy(),
            self.thrusts.copy(),
            self.contacts,
            None if self.foot_anchor is None else self.foot_anchor.copy(),
        )

    def validate(self, desc: RobotDescription, tol: float = 1e-9) -> None:
        r = self.base_rotation
        if np.max(np.abs(r.T @ r - np.eye(3))) > tol:
            raise ValueError("base_rotation is not orthonormal")
        check_joint_limits(desc, self.joint_angles)
        if np.any(self.thrusts < -tol) or np.any(self.thrusts > desc.max_thrust + tol):
            raise ValueError("thrust outside [0, max_thrust]")


def check_joint_limits(desc: RobotDescription, q: np.ndarray) -> None:
    bad = np.flatnonzero(np.abs(q) > desc.joint_limit + 1e-12)
    if bad.size:
        j = int(bad[0])
        raise JointLimitError(
            f"joint {desc.joint_name(j)} at {q[j]:.4f} rad exceeds "
            f"limit +/-{desc.joint_limit:.4f} rad"
        )


def rotor_mount(desc: RobotDescription, link_rot: np.ndarray, link_pos: np.ndarray,
                phi: float, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Rotor frame (position, rotation) in base axes for one link.

    The thrust unit sits ``rotor_offset`` along the rod. Its pitch gimbal is
    displaced from the roll axis by ``vectoring_axis_offset``, so the thrust
    origin moves slightly as phi changes; that coupling is what the wrench
    refinement step corrects for.
    """
    local = np.array([desc.rotor_offset, 0.0, 0.0]) + rot_x(phi) @ (
        desc.vectoring_axis_offset * Z_AXIS
    )
    pos = link_pos + link_rot @ local
    rot = link_rot @ rot_x(phi) @ rot_y(theta)
    return pos, rot


@dataclass
class FrameSet:
    """Forward-kinematics output, all in baselink axes.

    Positions are relative to the baselink origin; subtract ``cog`` to express
    them in the CoG frame (same axes). World-frame anchors of the source state
    are kept so downstream code can convert without re-running FK.
    """

    link_pos: np.ndarray          # (8, 3)
    link_rot: np.ndarray          # (8, 3, 3)
    rotor_pos: np.ndarray         # (8, 3) thrust origin, current vectoring roll
    rotor_rot: np.ndarray         # (8, 3, 3) thrust frame
    foot_pos: np.ndarray          # (4, 3) foot sphere centers
    joint_pos: np.ndarray         # (16, 3)
    joint_axis: np.ndarray        # (16, 3)
    seg_com: np.ndarray           # (9, 3) torso first, then links
    seg_mass: np.ndarray          # (9,)
    seg_inertia: np.ndarray       # (9, 3, 3) about each segment CoG, base axes
    cog: np.ndarray               # (3,) whole-body CoG, base frame
    base_position: np.ndarray     # (3,) world
    base_rotation: np.ndarray     # (3, 3) world

    def rotor_pos_cog(self) -> np.ndarray:
        return self.rotor_pos - self.cog

    def foot_pos_cog(self) -> np.ndarray:
        return self.foot_pos - self.cog

    def thrust_axes(self) -> np.ndarray:
        """Unit thrust directions u_i in base axes, shape (8, 3)."""
        return self.rotor_rot[:, :, 2]

    def cog_world(self) -> np.ndarray:
        return self.base_position + self.base_rotation @ self.cog

    def world_point(self, p_base: np.ndarray) -> np.ndarray:
        return self.base_position + self.base_rotation @ p_base

    def foot_pos_world(self) -> np.ndarray:
        return self.base_position + self.foot_pos @ self.base_rotation.T


def _segment_inertia_local(desc: RobotDescription) -> tuple[float, np.ndarray, np.ndarray]:
    """Mass, CoG x-offset and inertia (own CoG, link axes) of one link."""
    m_rod, m_rot = desc.link_rod_mass, desc.rotor_module_mass
    m = m_rod + m_rot
    x_rod, x_rot = desc.link_length / 2.0, desc.rotor_offset
    x_com = (m_rod * x_rod + m_rot * x_rot) / m
    # uniform rod (solid cylinder) about its own center
    i_ax = 0.5 * m_rod * desc.rod_radius**2
    i_tr = m_rod * (desc.link_length**2 / 12.0 + desc.rod_radius**2 / 4.0)
    inertia = np.diag([i_ax, i_tr, i_tr])
    # parallel-axis shifts of rod and rotor point mass onto the segment CoG
    for mass, x in ((m_rod, x_rod), (m_rot, x_rot)):
        d = x - x_com
        inertia += mass * np.diag([0.0, d * d, d * d])
    return m, np.array([x_com, 0.0, 0.0]), inertia


def forward_kinematics(desc: RobotDescription, state: RobotState,
                       check_limits: bool = True) -> FrameSet:
    """Compute every frame, segment CoG and the whole-body CoG.

    Raises JointLimitError (naming the joint) when asked to evaluate an
    out-of-range configuration, unless ``check_limits`` is disabled.
    """
    if check_limits:
        check_joint_limits(desc, state.joint_angles)

    q = state.joint_angles
    n_links = desc.n_links
    link_pos = np.zeros((n_links, 3))
    link_rot = np.zeros((n_links, 3, 3))
    rotor_pos = np.zeros((n_links, 3))
    rotor_rot = np.zeros((n_links, 3, 3))
    foot_pos = np.zeros((desc.n_legs, 3))
    joint_pos = np.zeros((desc.n_joints, 3))
    joint_axis = np.zeros((desc.n_joints, 3))

    seg_mass = np.zeros(desc.n_segments)
    seg_com = np.zeros((desc.n_segments, 3))
    seg_inertia = np.zeros((desc.n_segments, 3, 3))

    sx, sy, sz = desc.torso_size
    seg_mass[0] = desc.torso_mass
    seg_inertia[0] = (desc.torso_mass / 12.0) * np.diag(
        [sy * sy + sz * sz, sx * sx + sz * sz, sx * sx + sy * sy]
    )

    m_link, com_local, inertia_local = _segment_inertia_local(desc)
    rod = np.array([desc.link_length, 0.0, 0.0])

    for leg in range(desc.n_legs):
        j = 4 * leg
        hip = desc.torso_half_width * np.array(
            [np.cos(desc.leg_angles[leg]), np.sin(desc.leg_angles[leg]), 0.0]
        )
        r_mount = rot_z(desc.leg_angles[leg])

        joint_pos[j] = hip
        joint_axis[j] = r_mount @ Z_AXIS
        r_yaw = r_mount @ rot_z(q[j])
        joint_pos[j + 1] = hip
        joint_axis[j + 1] = r_yaw[:, 1]
        r_inner = r_yaw @ rot_y(q[j + 1])

        inner = 2 * leg
        link_pos[inner] = hip
        link_rot[inner] = r_inner

        knee = hip + r_inner @ rod
        joint_pos[j + 2] = knee
        joint_axis[j + 2] = r_inner[:, 2]
        r_kyaw = r_inner @ rot_z(q[j + 2])
        joint_pos[j + 3] = knee
        joint_axis[j + 3] = r_kyaw[:, 1]
        r_outer = r_kyaw @ rot_y(q[j + 3])

        outer = inner + 1
        link_pos[outer] = knee
        link_rot[outer] = r_outer
        foot_pos[leg] = knee + r_outer @ rod

        for link in (inner, outer):
            rotor_pos[link], rotor_rot[link] = rotor_mount(
                desc,
                link_rot[link],
                link_pos[link],
                float(state.vectoring_roll[link]),
                float(state.vectoring_pitch[link]),
            )
            seg_mass[1 + link] = m_link
            seg_com[1 + link] = link_pos[link] + link_rot[link] @ com_local
            seg_inertia[1 + link] = link_rot[link] @ inertia_local @ link_rot[link].T

    cog = (seg_mass[:, None] * seg_com).sum(axis=0) / seg_mass.sum()

    return FrameSet(
        link_pos=link_pos,
        link_rot=link_rot,
        rotor_pos=rotor_pos,
        rotor_rot=rotor_rot,
        foot_pos=foot_pos,
        joint_pos=joint_pos,
        joint_axis=joint_axis,
        seg_com=seg_com,
        seg_mass=seg_mass,
        seg_inertia=seg_inertia,
        cog=cog,
        base_position=np.asarray(state.base_position, dtype=float),
        base_rotation=np.asarray(state.base_rotation, dtype=float),
    )


def _chain_joints(desc: RobotDescription, kind: str, index: int) -> list[int]:
    if kind == "foot":
        if not 0 <= index < desc.n_legs:
            raise ValueError(f"no foot {index}")
        return list(range(4 * index, 4 * index + 4))
    if kind == "rotor":
        if not 0 <= index < desc.n_rotors:
            raise ValueError(f"no rotor {index}")
        return desc.link_joint_ids(index)
    if kind == "segment":
        if not 0 <= index < desc.n_segments:
            raise ValueError(f"no segment {index}")
        if index == 0:
            return []
        return desc.link_joint_ids(index - 1)
    raise ValueError(f"unknown jacobian target kind {kind!r}")


def _target_point(frames: FrameSet, kind: str, index: int) -> np.ndarray:
    if kind == "foot":
        return frames.foot_pos[index]
    if kind == "rotor":
        return frames.rotor_pos[index]
    return frames.seg_com[index]


def jacobian(desc: RobotDescription, frames: FrameSet, kind: str, index: int) -> np.ndarray:
    """3x16 Jacobian of a point (foot, rotor or segment CoG) w.r.t. joints.

    The map is taken with the base held fixed and is expressed in base (=CoG)
    axes, which is the pairing that makes J^T f a joint torque for a force f
    expressed in the same axes. A torso-mounted target has a zero Jacobian.
    """
    point = _target_point(frames, kind, index)
    jac = np.zeros((3, desc.n_joints))
    for j in _chain_joints(desc, kind, index):
        jac[:, j] = cross3(frames.joint_axis[j], point - frames.joint_pos[j])
    return jac


def total_inertia(desc: RobotDescription, frames: FrameSet) -> np.ndarray:
    """Composite rigid-body inertia about the CoG in base axes.

    Sum over segments of own inertia plus the parallel-axis term; symmetric
    positive definite for any configuration (rods have finite radius).
    """
    inertia = np.zeros((3, 3))
    for m, com, own in zip(frames.seg_mass, frames.seg_com, frames.seg_inertia):
        d = com - frames.cog
        inertia += own + m * (float(d @ d) * np.eye(3) - np.outer(d, d))
    return inertia


def cog_jacobian(desc: RobotDescription, frames: FrameSet) -> np.ndarray:
    """3x16 Jacobian of the whole-body CoG (mass-weighted segment average)."""
    total = frames.seg_mass.sum()
    jac = np.zeros((3, desc.n_joints))
    for s in range(desc.n_segments):
        jac += frames.seg_mass[s] * jacobian(desc, frames, "segment", s)
    return jac / total


def cog_state(desc: RobotDescription, frames: FrameSet, state: RobotState
              ) -> tuple[np.ndarray, np.ndarray]:
    """World-frame CoG position and velocity implied by a robot state."""
    r = state.base_rotation
    pos = state.base_position + r @ frames.cog
    vel = (
        state.base_lin_vel
        + r @ cross3(state.base_ang_vel, frames.cog)
        + r @ (cog_jacobian(desc, frames) @ state.joint_velocities)
    )
    return pos, vel


def point_world_velocity(frames: FrameSet, state: RobotState, point_base: np.ndarray,
                         jac: np.ndarray) -> np.ndarray:
    """World velocity of a body-fixed point given its base-frame Jacobian."""
    r = state.base_rotation
    return (
        state.base_lin_vel
        + r @ cross3(state.base_ang_vel, point_base)
        + r @ (jac @ state.joint_velocities)
    )
