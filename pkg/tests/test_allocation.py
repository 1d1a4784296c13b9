"""Wrench-allocation pipeline: hover symmetry, residuals, bounds, modes."""
import numpy as np
import pytest

from vectorquad.allocation import (AllocationError, AllocationWeights,
                                   allocate, build_qp, gravity_wrench,
                                   solve_allocation)
from vectorquad.model import RobotDescription, RobotState, forward_kinematics
from vectorquad.thrust import force_blocks, wrench_of_link_forces

DESC = RobotDescription()
WEIGHT = DESC.total_mass * 9.8  # 148.96 N


def _stance_frames(rng=None, scale=0.6):
    st = RobotState.rest(DESC, height=0.3)
    if rng is not None:
        st.joint_angles = rng.uniform(-scale * np.pi / 2, scale * np.pi / 2, 16)
    return forward_kinematics(DESC, st)


def test_gravity_wrench_value():
    np.testing.assert_allclose(gravity_wrench(DESC),
                               [0.0, 0.0, WEIGHT, 0.0, 0.0, 0.0], atol=1e-12)


def test_flat_hover_splits_weight_evenly():
    """Free flight, flat pose: symmetry forces 18.62 N straight up per unit."""
    frames = _stance_frames()
    res = allocate(DESC, frames, gravity_wrench(DESC), contact_legs=(),
                   weights=AllocationWeights(thrust=1.0, torque=0.0))
    share = WEIGHT / DESC.n_rotors
    assert share == pytest.approx(18.62)
    norms = np.linalg.norm(res.link_forces, axis=1)
    np.testing.assert_allclose(norms, share, atol=1e-6)
    np.testing.assert_allclose(res.link_forces[:, 2], share, atol=1e-6)
    for cmd in res.commands:
        assert cmd.thrust == pytest.approx(share, abs=1e-6)
        assert abs(cmd.roll) < 1e-6 and abs(cmd.pitch) < 1e-6
    assert res.qp.wrench_residual < 1e-9
    assert res.qp.equilibrium_residual < 1e-9
    assert res.degenerate_rotors == () and res.clipped_rotors == ()


def test_realized_wrench_two_routes():
    """The QP's frozen-origin wrench map and the origin-re-deriving evaluator
    must both certify the solution, each within its own tolerance."""
    rng = np.random.default_rng(50)
    for _ in range(5):
        frames = _stance_frames(rng)
        wrench = gravity_wrench(DESC) + np.concatenate(
            [rng.normal(size=3) * 5.0, rng.normal(size=3) * 1.0])
        raw = allocate(DESC, frames, wrench, contact_legs=(), refine=False)
        via_blocks = np.einsum("ijk,ik->j", force_blocks(frames),
                               raw.link_forces)
        np.testing.assert_allclose(via_blocks, wrench, atol=1e-8)
        # un-refined forces realize the wrench only up to the gimbal offset
        refined = allocate(DESC, frames, wrench, contact_legs=())
        realized = wrench_of_link_forces(DESC, frames, refined.link_forces)
        np.testing.assert_allclose(realized, wrench, atol=1e-6)
        assert refined.refine is not None and refined.refine.converged


def test_stance_modes_satisfy_residuals_and_bounds():
    rng = np.random.default_rng(51)
    box = DESC.max_thrust / np.sqrt(3.0)
    for legs in ((), (0, 1, 2), (0, 2, 3), (0, 1, 2, 3)):
        for _ in range(5):
            frames = _stance_frames(rng, scale=0.5)
            wrench = gravity_wrench(DESC) + rng.normal(size=6) * 2.0
            res = allocate(DESC, frames, wrench, contact_legs=legs,
                           torque_limit=1.5, refine=False)
            sol = res.qp
            assert sol.wrench_residual < 1e-6
            assert sol.equilibrium_residual < 1e-6
            assert np.abs(res.link_forces).max() <= box + 1e-9
            assert np.abs(res.joint_torques).max() <= 1.5 + 1e-9
            assert res.contact_forces.shape == (len(legs), 3)
            if legs:
                assert res.contact_forces[:, 2].min() >= -1e-9


def test_weight_scaling_leaves_minimizer_unchanged():
    rng = np.random.default_rng(52)
    frames = _stance_frames(rng)
    wrench = gravity_wrench(DESC)
    a = allocate(DESC, frames, wrench, contact_legs=(0, 1, 2, 3),
                 weights=AllocationWeights(thrust=1.0, torque=1.0),
                 refine=False)
    b = allocate(DESC, frames, wrench, contact_legs=(0, 1, 2, 3),
                 weights=AllocationWeights(thrust=7.0, torque=7.0),
                 refine=False)
    np.testing.assert_allclose(b.link_forces, a.link_forces, atol=1e-6)
    np.testing.assert_allclose(b.joint_torques, a.joint_torques, atol=1e-6)


def test_weights_validation():
    with pytest.raises(ValueError):
        AllocationWeights(thrust=0.0)
    with pytest.raises(ValueError):
        AllocationWeights(thrust=1.0, torque=-0.5)
    AllocationWeights(thrust=1.0, torque=0.0)  # aerial tuning is legal


def test_build_qp_input_validation():
    frames = _stance_frames()
    with pytest.raises(ValueError, match="6-vector"):
        build_qp(DESC, frames, np.zeros(5))
    with pytest.raises(ValueError, match="contact count"):
        build_qp(DESC, frames, np.zeros(6), contact_legs=(0,))
    with pytest.raises(ValueError, match="invalid contact legs"):
        build_qp(DESC, frames, np.zeros(6), contact_legs=(0, 0, 1))
    with pytest.raises(ValueError, match="invalid contact legs"):
        build_qp(DESC, frames, np.zeros(6), contact_legs=(1, 2, 7))


def test_problem_slices_partition_variables():
    frames = _stance_frames()
    prob = build_qp(DESC, frames, gravity_wrench(DESC), contact_legs=(0, 1, 2))
    assert prob.n_vars == 24 + 16 + 9
    assert prob.force_slice() == slice(0, 24)
    assert prob.torque_slice() == slice(24, 40)
    assert prob.contact_slice() == slice(40, 49)
    assert prob.a_eq.shape == (22, 49)
    # thrust boxes: 2 rows per component, torque boxes, one normal row per leg
    assert prob.a_in.shape == (48 + 32 + 3, 49)


def test_infeasible_wrench_raises_with_partial_solution():
    frames = _stance_frames()
    absurd = np.array([0.0, 0.0, 5000.0, 0.0, 0.0, 0.0])  # > 8 * 42 N total
    with pytest.raises(AllocationError) as exc:
        allocate(DESC, frames, absurd, contact_legs=())
    assert exc.value.result is not None
    assert exc.value.result.status != "optimal"
    assert exc.value.result.most_violated is not None


def test_extra_link_forces_shift_the_refine_target():
    rng = np.random.default_rng(53)
    frames = _stance_frames(rng, scale=0.4)
    wrench = gravity_wrench(DESC)
    extra = np.zeros((8, 3))
    extra[0] = [0.0, 0.0, 1.5]
    extra[2] = [0.0, 0.0, -0.5]
    res = allocate(DESC, frames, wrench, contact_legs=(0, 1, 2, 3),
                   extra_link_forces=extra)
    shift = np.einsum("ijk,ik->j", force_blocks(frames), extra)
    np.testing.assert_allclose(res.wrench_target, wrench + shift, atol=1e-12)
    realized = wrench_of_link_forces(DESC, frames, res.link_forces)
    np.testing.assert_allclose(realized, res.wrench_target, atol=1e-5)


def test_hold_angles_cover_degenerate_rotors():
    # with gravity off, a zero wrench lets every rotor idle (a zero wrench
    # under gravity still needs thrust to balance the joint loads);
    # held angles pass through for the idle units
    frames = _stance_frames()
    hold_roll = np.linspace(-0.4, 0.4, 8)
    hold_pitch = np.linspace(0.2, -0.2, 8)
    res = allocate(DESC, frames, np.zeros(6), contact_legs=(),
                   gravity=np.zeros(3),
                   hold_roll=hold_roll, hold_pitch=hold_pitch, refine=False)
    assert res.degenerate_rotors == tuple(range(8))
    for i, cmd in enumerate(res.commands):
        assert cmd.roll == pytest.approx(hold_roll[i])
        assert cmd.pitch == pytest.approx(hold_pitch[i])
        assert cmd.thrust == pytest.approx(0.0, abs=1e-9)


def test_solve_allocation_reports_active_set_and_time():
    frames = _stance_frames()
    prob = build_qp(DESC, frames, gravity_wrench(DESC),
                    contact_legs=(0, 1, 2, 3))
    sol = solve_allocation(DESC, prob)
    assert sol.optimal
    assert sol.solve_time >= 0.0
    assert isinstance(sol.active, tuple)
    assert sol.objective >= 0.0


def test_prefer_warm_start_is_consistent():
    rng = np.random.default_rng(54)
    frames = _stance_frames(rng, scale=0.5)
    wrench = gravity_wrench(DESC) + rng.normal(size=6)
    cold = allocate(DESC, frames, wrench, contact_legs=(0, 1, 2, 3),
                    refine=False)
    warm = allocate(DESC, frames, wrench, contact_legs=(0, 1, 2, 3),
                    prefer=cold.qp.active, refine=False)
    np.testing.assert_allclose(warm.link_forces, cold.link_forces, atol=1e-8)
    np.testing.assert_allclose(warm.joint_torques, cold.joint_torques,
                               atol=1e-8)
