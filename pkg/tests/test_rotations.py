"""Unit checks for the SO(3) helper toolbox."""
import numpy as np
import pytest

from vectorquad.rotations import (cross3, exp_so3, orthonormalize,
                                  polar_orthonormalize, random_rotation,
                                  rot_x, rot_y, rot_z, rpy_from_matrix, skew,
                                  vee, wrap_angle)


def test_skew_matches_cross_product():
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = rng.normal(size=3)
        u = rng.normal(size=3)
        np.testing.assert_allclose(skew(v) @ u, np.cross(v, u), atol=1e-14)


def test_vee_inverts_skew():
    rng = np.random.default_rng(1)
    for _ in range(50):
        v = rng.normal(size=3)
        np.testing.assert_array_equal(vee(skew(v)), v)


def test_cross3_matches_numpy():
    rng = np.random.default_rng(2)
    for _ in range(100):
        a, b = rng.normal(size=3), rng.normal(size=3)
        np.testing.assert_allclose(cross3(a, b), np.cross(a, b), atol=1e-14)


def test_elementary_rotations_are_special_orthogonal():
    rng = np.random.default_rng(3)
    for make in (rot_x, rot_y, rot_z):
        for a in rng.uniform(-2 * np.pi, 2 * np.pi, 20):
            r = make(a)
            np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-14)
            assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-14)


def test_rot_z_quarter_turn_maps_x_to_y():
    r = rot_z(np.pi / 2)
    np.testing.assert_allclose(r @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(r @ [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], atol=1e-15)


def test_exp_so3_matches_elementary_rotations():
    rng = np.random.default_rng(4)
    for a in rng.uniform(-np.pi, np.pi, 25):
        np.testing.assert_allclose(exp_so3(np.array([a, 0, 0])), rot_x(a), atol=1e-13)
        np.testing.assert_allclose(exp_so3(np.array([0, a, 0])), rot_y(a), atol=1e-13)
        np.testing.assert_allclose(exp_so3(np.array([0, 0, a])), rot_z(a), atol=1e-13)


def test_exp_so3_identity_and_full_turn():
    np.testing.assert_array_equal(exp_so3(np.zeros(3)), np.eye(3))
    w = np.array([0.0, 0.0, 2 * np.pi])
    np.testing.assert_allclose(exp_so3(w), np.eye(3), atol=1e-12)


def test_exp_so3_series_branch_is_continuous():
    # straddle the small-angle switchover; both branches must agree
    axis = np.array([1.0, 2.0, -2.0]) / 3.0
    for mag in (1e-9, 9.99e-9, 1.01e-8, 1e-7):
        r = exp_so3(mag * axis)
        np.testing.assert_allclose(r, np.eye(3) + mag * skew(axis), atol=1e-15)
        np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-15)


def test_orthonormalize_contracts_drift():
    rng = np.random.default_rng(5)
    for _ in range(30):
        r = random_rotation(rng)
        drifted = r + 1e-4 * rng.normal(size=(3, 3))
        fixed = orthonormalize(drifted)
        defect_in = np.abs(drifted.T @ drifted - np.eye(3)).max()
        defect_out = np.abs(fixed.T @ fixed - np.eye(3)).max()
        # one Newton step: quadratic contraction of the orthonormality defect
        assert defect_out < 10.0 * defect_in**2


def test_polar_orthonormalize_exact_and_idempotent():
    rng = np.random.default_rng(6)
    for _ in range(30):
        r = random_rotation(rng)
        noisy = r + 1e-3 * rng.normal(size=(3, 3))
        p = polar_orthonormalize(noisy)
        np.testing.assert_allclose(p.T @ p, np.eye(3), atol=1e-12)
        assert np.linalg.det(p) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(polar_orthonormalize(r), r, atol=1e-12)


def test_wrap_angle_scalar_cases():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)       # half-open (-pi, pi]
    assert wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
    assert wrap_angle(-3 * np.pi / 2) == pytest.approx(np.pi / 2)
    assert wrap_angle(5 * np.pi) == pytest.approx(np.pi)
    assert isinstance(wrap_angle(1.0), float)


def test_wrap_angle_array_is_periodic():
    rng = np.random.default_rng(7)
    a = rng.uniform(-np.pi, np.pi, 200) * 0.999
    np.testing.assert_allclose(wrap_angle(a + 6 * np.pi), a, atol=1e-12)
    assert wrap_angle(a).shape == a.shape


def test_rpy_roundtrip():
    rng = np.random.default_rng(8)
    for _ in range(200):
        roll = rng.uniform(-np.pi, np.pi)
        pitch = rng.uniform(-np.pi / 2 + 0.05, np.pi / 2 - 0.05)
        yaw = rng.uniform(-np.pi, np.pi)
        r = rot_z(yaw) @ rot_y(pitch) @ rot_x(roll)
        np.testing.assert_allclose(rpy_from_matrix(r), [roll, pitch, yaw], atol=1e-12)


def test_random_rotation_is_special_orthogonal():
    rng = np.random.default_rng(9)
    for _ in range(100):
        r = random_rotation(rng)
        np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-12)
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)


def test_random_rotation_trace_statistic():
    # Haar-uniform rotations have E[trace] = 0 (rotation angle density
    # (1 - cos t)/pi gives E[cos t] = -1/2, trace = 1 + 2 cos t)
    rng = np.random.default_rng(10)
    traces = [np.trace(random_rotation(rng)) for _ in range(4000)]
    assert abs(np.mean(traces)) < 0.08
