"""Kinematics and mass-model checks.

The heart of this file is an independent forward-kinematics oracle built from
plain 4x4 homogeneous transforms, written directly from the frame conventions
(hip yaw about local z, pitches about local y, rods along local x). It shares
no code with the library implementation.
"""
import numpy as np
import pytest

from vectorquad.model import (FrameSet, JointLimitError, RobotDescription,
                              RobotState, check_joint_limits, cog_jacobian,
                              cog_state, forward_kinematics, jacobian,
                              point_world_velocity, rotor_mount, total_inertia)
from vectorquad.rotations import exp_so3, random_rotation, rot_x, rot_y, rot_z

DESC = RobotDescription()


def _hom(rot=None, pos=None):
    t = np.eye(4)
    if rot is not None:
        t[:3, :3] = rot
    if pos is not None:
        t[:3, 3] = pos
    return t


def _oracle_leg_frames(desc, q_leg, leg):
    """Foot/link frames of one leg from an explicit transform chain."""
    alpha = desc.leg_angles[leg]
    hip_pos = desc.torso_half_width * np.array(
        [np.cos(alpha), np.sin(alpha), 0.0])
    rod = _hom(pos=[desc.link_length, 0.0, 0.0])
    t_hip = _hom(rot_z(alpha), hip_pos)
    t_inner = t_hip @ _hom(rot_z(q_leg[0])) @ _hom(rot_y(q_leg[1]))
    t_knee = t_inner @ rod
    t_outer = t_knee @ _hom(rot_z(q_leg[2])) @ _hom(rot_y(q_leg[3]))
    t_foot = t_outer @ rod
    return t_inner, t_knee, t_outer, t_foot


def _random_state(rng, scale=1.0):
    st = RobotState.rest(DESC)
    st.joint_angles = rng.uniform(-scale * np.pi / 2, scale * np.pi / 2, 16)
    st.vectoring_roll = rng.uniform(-np.pi, np.pi, 8)
    st.vectoring_pitch = rng.uniform(-np.pi, np.pi, 8)
    return st


def test_forward_kinematics_matches_transform_chain():
    rng = np.random.default_rng(11)
    for _ in range(50):
        st = _random_state(rng)
        fk = forward_kinematics(DESC, st)
        for leg in range(4):
            q = st.joint_angles[4 * leg:4 * leg + 4]
            t_inner, t_knee, t_outer, t_foot = _oracle_leg_frames(DESC, q, leg)
            np.testing.assert_allclose(fk.link_pos[2 * leg], t_inner[:3, 3], atol=1e-12)
            np.testing.assert_allclose(fk.link_rot[2 * leg], t_inner[:3, :3], atol=1e-12)
            np.testing.assert_allclose(fk.link_pos[2 * leg + 1], t_knee[:3, 3], atol=1e-12)
            np.testing.assert_allclose(fk.link_rot[2 * leg + 1], t_outer[:3, :3], atol=1e-12)
            np.testing.assert_allclose(fk.foot_pos[leg], t_foot[:3, 3], atol=1e-12)


def test_rotor_frames_match_transform_chain():
    rng = np.random.default_rng(12)
    for _ in range(25):
        st = _random_state(rng)
        fk = forward_kinematics(DESC, st)
        for leg in range(4):
            q = st.joint_angles[4 * leg:4 * leg + 4]
            t_inner, _, t_outer, _ = _oracle_leg_frames(DESC, q, leg)
            for link, t_link in ((2 * leg, t_inner), (2 * leg + 1, t_outer)):
                phi = st.vectoring_roll[link]
                theta = st.vectoring_pitch[link]
                t_rot = (t_link @ _hom(pos=[DESC.rotor_offset, 0, 0])
                         @ _hom(rot_x(phi))
                         @ _hom(pos=[0, 0, DESC.vectoring_axis_offset])
                         @ _hom(rot_y(theta)))
                np.testing.assert_allclose(fk.rotor_pos[link], t_rot[:3, 3], atol=1e-12)
                np.testing.assert_allclose(fk.rotor_rot[link], t_rot[:3, :3], atol=1e-12)


def test_flat_pose_feet_and_cog():
    fk = forward_kinematics(DESC, RobotState.rest(DESC))
    # hip radius + two rods = 1.35 m along each diagonal
    reach = (DESC.torso_half_width + 2 * DESC.link_length) / np.sqrt(2.0)
    assert reach == pytest.approx(0.9545941546018392, abs=1e-15)
    np.testing.assert_allclose(fk.foot_pos[0], [reach, reach, 0.0], atol=1e-12)
    np.testing.assert_allclose(fk.foot_pos[2], [-reach, -reach, 0.0], atol=1e-12)
    # point-symmetric flat robot: CoG exactly at the torso center
    np.testing.assert_allclose(fk.cog, np.zeros(3), atol=1e-14)


def test_mass_bookkeeping():
    assert DESC.total_mass == pytest.approx(15.2)
    assert DESC.link_mass == pytest.approx(1.4)
    fk = forward_kinematics(DESC, RobotState.rest(DESC))
    assert fk.seg_mass.sum() == pytest.approx(DESC.total_mass)
    assert fk.seg_mass[0] == DESC.torso_mass


def test_flat_pose_inertia_by_hand():
    """Composite inertia of the flat pose from first principles.

    Rod CoG (L/2) and rotor module (rotor_offset) both sit 0.27 m out, so
    each link segment is a point-like 1.4 kg at radius 0.54 (inner) or
    1.08 m (outer) plus the rod's own transverse moment.
    """
    fk = forward_kinematics(DESC, RobotState.rest(DESC))
    inertia = total_inertia(DESC, fk)
    i_tr = DESC.link_rod_mass * (DESC.link_length**2 / 12.0
                                 + DESC.rod_radius**2 / 4.0)
    sx, sy, sz = DESC.torso_size
    izz = (DESC.torso_mass / 12.0 * (sx * sx + sy * sy)
           + 8 * i_tr
           + 4 * DESC.link_mass * (0.54**2 + 1.08**2))
    assert inertia[2, 2] == pytest.approx(izz, rel=1e-12)
    assert inertia[0, 0] == pytest.approx(inertia[1, 1], rel=1e-12)
    np.testing.assert_allclose(inertia - np.diag(np.diag(inertia)),
                               np.zeros((3, 3)), atol=1e-12)


def test_total_inertia_symmetric_positive_definite():
    rng = np.random.default_rng(13)
    for _ in range(20):
        st = _random_state(rng)
        inertia = total_inertia(DESC, forward_kinematics(DESC, st))
        np.testing.assert_allclose(inertia, inertia.T, atol=1e-12)
        assert np.linalg.eigvalsh(inertia).min() > 0.0


def _fd_jacobian(st, kind, index, h=1e-6):
    jac = np.zeros((3, 16))
    for j in range(16):
        hi, lo = st.copy(), st.copy()
        hi.joint_angles[j] += h
        lo.joint_angles[j] -= h
        fk_hi = forward_kinematics(DESC, hi, check_limits=False)
        fk_lo = forward_kinematics(DESC, lo, check_limits=False)
        if kind == "foot":
            p_hi, p_lo = fk_hi.foot_pos[index], fk_lo.foot_pos[index]
        elif kind == "rotor":
            p_hi, p_lo = fk_hi.rotor_pos[index], fk_lo.rotor_pos[index]
        else:
            p_hi, p_lo = fk_hi.seg_com[index], fk_lo.seg_com[index]
        jac[:, j] = (p_hi - p_lo) / (2 * h)
    return jac


def test_jacobians_match_finite_differences():
    rng = np.random.default_rng(14)
    for _ in range(5):
        st = _random_state(rng, scale=0.9)
        fk = forward_kinematics(DESC, st)
        for kind, count in (("foot", 4), ("rotor", 8), ("segment", 9)):
            for index in range(count):
                jac = jacobian(DESC, fk, kind, index)
                np.testing.assert_allclose(jac, _fd_jacobian(st, kind, index),
                                           atol=1e-5)


def test_cog_jacobian_matches_finite_differences():
    rng = np.random.default_rng(15)
    h = 1e-6
    for _ in range(5):
        st = _random_state(rng, scale=0.9)
        jac = cog_jacobian(DESC, forward_kinematics(DESC, st))
        fd = np.zeros((3, 16))
        for j in range(16):
            hi, lo = st.copy(), st.copy()
            hi.joint_angles[j] += h
            lo.joint_angles[j] -= h
            fd[:, j] = (forward_kinematics(DESC, hi, check_limits=False).cog
                        - forward_kinematics(DESC, lo, check_limits=False).cog) / (2 * h)
        np.testing.assert_allclose(jac, fd, atol=1e-5)


def test_torso_targets_have_zero_jacobian():
    fk = forward_kinematics(DESC, RobotState.rest(DESC))
    np.testing.assert_array_equal(jacobian(DESC, fk, "segment", 0),
                                  np.zeros((3, 16)))


def test_point_world_velocity_matches_finite_difference():
    rng = np.random.default_rng(16)
    h = 1e-7
    for _ in range(10):
        st = _random_state(rng, scale=0.8)
        st.base_position = rng.normal(size=3)
        st.base_rotation = random_rotation(rng)
        st.base_lin_vel = rng.normal(size=3)
        st.base_ang_vel = rng.normal(size=3)
        st.joint_velocities = rng.normal(size=16) * 0.3
        fk = forward_kinematics(DESC, st)
        leg = int(rng.integers(4))
        vel = point_world_velocity(fk, st, fk.foot_pos[leg],
                                   jacobian(DESC, fk, "foot", leg))
        # advance the full state by h and difference the world foot position
        nxt = st.copy()
        nxt.base_position = st.base_position + h * st.base_lin_vel
        nxt.base_rotation = st.base_rotation @ exp_so3(h * st.base_ang_vel)
        nxt.joint_angles = st.joint_angles + h * st.joint_velocities
        p0 = fk.foot_pos_world()[leg]
        p1 = forward_kinematics(DESC, nxt, check_limits=False).foot_pos_world()[leg]
        np.testing.assert_allclose(vel, (p1 - p0) / h, atol=1e-5)


def test_cog_state_velocity_matches_finite_difference():
    rng = np.random.default_rng(17)
    h = 1e-7
    st = _random_state(rng, scale=0.8)
    st.base_lin_vel = rng.normal(size=3)
    st.base_ang_vel = rng.normal(size=3)
    st.joint_velocities = rng.normal(size=16) * 0.3
    fk = forward_kinematics(DESC, st)
    pos, vel = cog_state(DESC, fk, st)
    np.testing.assert_allclose(pos, fk.cog_world(), atol=1e-12)
    nxt = st.copy()
    nxt.base_position = st.base_position + h * st.base_lin_vel
    nxt.base_rotation = st.base_rotation @ exp_so3(h * st.base_ang_vel)
    nxt.joint_angles = st.joint_angles + h * st.joint_velocities
    fk2 = forward_kinematics(DESC, nxt, check_limits=False)
    np.testing.assert_allclose(vel, (fk2.cog_world() - fk.cog_world()) / h,
                               atol=1e-5)


def test_rotor_mount_roll_offset():
    # the pitch gimbal rides vectoring_axis_offset above the roll axis
    link_rot, link_pos = np.eye(3), np.zeros(3)
    pos0, rot0 = rotor_mount(DESC, link_rot, link_pos, 0.0, 0.0)
    np.testing.assert_allclose(pos0, [DESC.rotor_offset, 0.0, 0.005], atol=1e-15)
    np.testing.assert_array_equal(rot0, np.eye(3))
    pos_pi, _ = rotor_mount(DESC, link_rot, link_pos, np.pi, 0.0)
    np.testing.assert_allclose(pos_pi, [DESC.rotor_offset, 0.0, -0.005], atol=1e-12)
    _, rot_full = rotor_mount(DESC, link_rot, link_pos, 0.3, -0.7)
    np.testing.assert_allclose(rot_full, rot_x(0.3) @ rot_y(-0.7), atol=1e-14)


def test_joint_limit_errors_name_the_joint():
    q = np.zeros(16)
    q[6] = np.pi / 2 + 0.01
    with pytest.raises(JointLimitError, match="leg1_knee_yaw"):
        check_joint_limits(DESC, q)
    st = RobotState.rest(DESC)
    st.joint_angles = q
    with pytest.raises(JointLimitError):
        forward_kinematics(DESC, st)
    forward_kinematics(DESC, st, check_limits=False)  # explicit opt-out works


def test_state_validate_and_copy():
    st = RobotState.rest(DESC, height=0.5)
    st.validate(DESC)
    bad = st.copy()
    bad.base_rotation = np.eye(3) * 1.01
    with pytest.raises(ValueError, match="orthonormal"):
        bad.validate(DESC)
    worse = st.copy()
    worse.thrusts = np.full(8, DESC.max_thrust + 1.0)
    with pytest.raises(ValueError, match="thrust"):
        worse.validate(DESC)
    # copy is deep for the array fields
    other = st.copy()
    other.joint_angles[3] = 0.7
    assert st.joint_angles[3] == 0.0


def test_description_validation_and_indexing():
    with pytest.raises(ValueError):
        RobotDescription(torso_mass=-1.0)
    with pytest.raises(ValueError, match="rotor_offset"):
        RobotDescription(rotor_offset=0.6)
    assert DESC.inner_rotors == (0, 2, 4, 6)
    assert DESC.link_joint_ids(0) == [0, 1]
    assert DESC.link_joint_ids(1) == [0, 1, 2, 3]
    assert DESC.link_joint_ids(7) == [12, 13, 14, 15]
    assert DESC.joint_name(13) == "leg3_hip_pitch"
    assert DESC.leg_joints(2) == slice(8, 12)
