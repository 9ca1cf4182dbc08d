"""Arm kinematics, Jacobians, centre of mass and the battery carriage."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uamsim.arm import (
    ArmModel,
    BatteryCarriage,
    arm_com,
    arm_com_x,
    battery_setpoint,
    combined_com_x,
    forward_kinematics,
    jacobian,
    jacobian_and_dot,
    jacobian_dot,
)
from uamsim.spatial import numeric_jacobian, quat_to_rotvec, quat_multiply, quat_conjugate

from conftest import sample_joints


def _rot(axis: np.ndarray, angle: float) -> np.ndarray:
    """Independent rotation matrix: R = cI + s[a]x + (1-c) a a^T."""
    a = np.asarray(axis, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    hat = np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])
    return c * np.eye(3) + s * hat + (1.0 - c) * np.outer(a, a)


def _homog(rot=None, trans=None) -> np.ndarray:
    out = np.eye(4)
    if rot is not None:
        out[:3, :3] = rot
    if trans is not None:
        out[:3, 3] = trans
    return out


def reference_tool_transform(arm: ArmModel, q: np.ndarray) -> np.ndarray:
    """Tool pose as a plain 4x4 homogeneous-matrix product.

    Serves as an independent check of the chain convention: each joint
    rotates about its local axis, then the frame translates along its
    own (post-rotation) x-axis by the link offset; the tool tip extends
    a further ``tool_offset``.
    """
    t = _homog(arm.mount.rotation(), arm.mount.position)
    for axis, angle, offset in zip(arm.joint_axes, q, arm.link_offsets):
        t = t @ _homog(_rot(axis, angle)) @ _homog(trans=[offset, 0.0, 0.0])
    return t @ _homog(trans=[arm.tool_offset, 0.0, 0.0])


# ---------------------------------------------------------------------------
# model construction


def test_default_geometry(arm):
    assert arm.dof == 5
    assert arm.reach == pytest.approx(0.75)
    assert arm.mass == pytest.approx(1.5)
    np.testing.assert_allclose(arm.com_offsets, 0.5 * arm.link_offsets)


def test_model_validation_rejects_bad_inputs():
    with pytest.raises(ValueError, match="unit"):
        ArmModel(joint_axes=np.array([[0, 0, 2.0]] * 5))
    with pytest.raises(ValueError, match="offset"):
        ArmModel(link_offsets=np.array([0.1, -0.2, 0.25, 0.1, 0.0]))
    with pytest.raises(ValueError, match="mass"):
        ArmModel(link_masses=np.zeros(5))
    with pytest.raises(ValueError, match="limits"):
        ArmModel(joint_lower=np.full(5, 1.0), joint_upper=np.full(5, -1.0))
    with pytest.raises(ValueError, match="rate"):
        ArmModel(servo_rate_limit=0.0)


def test_check_limits_and_clamp(arm):
    q_bad = arm.joint_upper + 0.5
    with pytest.raises(ValueError, match="outside limits"):
        arm.check_limits(q_bad)
    with pytest.raises(ValueError, match="joint values"):
        arm.check_limits(np.zeros(3))
    np.testing.assert_allclose(arm.clamp(q_bad), arm.joint_upper)


def test_forward_kinematics_rejects_out_of_limit(arm):
    with pytest.raises(ValueError):
        forward_kinematics(arm, arm.joint_upper + 0.1)


# ---------------------------------------------------------------------------
# forward kinematics


def test_fk_straight_arm(arm):
    # All joints at zero: the chain runs along +x from the mount.
    pose = forward_kinematics(arm, np.zeros(5))
    np.testing.assert_allclose(pose.position, [0.10 + 0.75, 0.0, -0.08], atol=1e-15)
    np.testing.assert_allclose(pose.rotation(), np.eye(3), atol=1e-15)


def test_fk_pure_shoulder_yaw(arm):
    # Rotating only the first (z-axis) joint swings the whole chain in
    # the horizontal plane about the mount point.
    q = np.array([np.pi / 2, 0.0, 0.0, 0.0, 0.0])
    pose = forward_kinematics(arm, q)
    np.testing.assert_allclose(pose.position, [0.10, 0.75, -0.08], atol=1e-12)


def test_fk_matches_homogeneous_matrix_reference(arm, rng):
    for _ in range(100):
        q = sample_joints(rng, arm)
        pose = forward_kinematics(arm, q)
        ref = reference_tool_transform(arm, q)
        np.testing.assert_allclose(pose.position, ref[:3, 3], atol=1e-12)
        np.testing.assert_allclose(pose.rotation(), ref[:3, :3], atol=1e-12)


def test_fk_orientation_quaternion_is_unit(arm, random_q):
    for _ in range(20):
        pose = forward_kinematics(arm, random_q())
        assert np.linalg.norm(pose.orientation) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# Jacobians


def test_jacobian_matches_finite_difference(arm, rng):
    for _ in range(100):
        q = sample_joints(rng, arm)
        jac = jacobian(arm, q)
        fd = numeric_jacobian(lambda qq: forward_kinematics(arm, qq).position, q)
        scale = max(1.0, np.abs(jac[:3]).max())
        assert np.abs(jac[:3] - fd).max() / scale < 1e-6


def test_jacobian_rotational_rows_match_finite_difference(arm, rng):
    # Angular velocity check via quaternion differencing: for a small
    # joint displacement dq, the orientation change as a rotation vector
    # approaches J_rot dq.
    for _ in range(25):
        q = sample_joints(rng, arm)
        jac = jacobian(arm, q)
        h = 1e-7
        for i in range(arm.dof):
            dq = np.zeros(arm.dof)
            dq[i] = h
            qa = forward_kinematics(arm, q + dq).orientation
            qb = forward_kinematics(arm, q - dq).orientation
            rv = quat_to_rotvec(quat_multiply(qa, quat_conjugate(qb))) / (2 * h)
            np.testing.assert_allclose(jac[3:, i], rv, atol=1e-5)


def test_jacobian_columns_geometric_form(arm, random_q):
    # Column i is (axis_i x (tip - origin_i); axis_i); the rotational
    # block therefore has unit norm per column.
    jac = jacobian(arm, random_q())
    np.testing.assert_allclose(np.linalg.norm(jac[3:], axis=0), 1.0, atol=1e-12)


def test_jacobian_rank_drops_in_folded_pose(arm):
    # With every joint at zero the three pitch axes are parallel and
    # their translational action collinear: rank falls to 4 of 5.
    assert np.linalg.matrix_rank(jacobian(arm, np.zeros(5))) == 4
    q_home = np.array([0.0, 0.7901, -2.7854, 1.7953, 0.0])
    assert np.linalg.matrix_rank(jacobian(arm, q_home)) == 5


def test_jacobian_dot_matches_finite_difference(arm, rng):
    for _ in range(30):
        q = sample_joints(rng, arm, margin=0.3)
        qdot = rng.uniform(-1.0, 1.0, size=arm.dof)
        _, jd = jacobian_and_dot(arm, q, qdot)
        h = 1e-6
        fd = (jacobian(arm, q + qdot * h) - jacobian(arm, q - qdot * h)) / (2 * h)
        scale = max(1.0, np.abs(jd).max())
        assert np.abs(jd - fd).max() / scale < 1e-5


def test_jacobian_and_dot_agrees_with_jacobian(arm, random_q):
    q = random_q()
    jac, _ = jacobian_and_dot(arm, q, np.zeros(arm.dof))
    np.testing.assert_allclose(jac, jacobian(arm, q), atol=1e-15)


def test_jacobian_dot_zero_velocity(arm, random_q):
    np.testing.assert_allclose(
        jacobian_dot(arm, random_q(), np.zeros(arm.dof)), 0.0, atol=1e-15
    )


# ---------------------------------------------------------------------------
# centre of mass


def test_arm_com_straight_arm_closed_form(arm):
    # Mid-link CoMs along a straight chain: weighted average of the
    # cumulative offsets, shifted by the mount.
    ends = np.concatenate([[0.0], np.cumsum(arm.link_offsets)])
    mids = ends[:-1] + 0.5 * arm.link_offsets
    expected_x = 0.10 + np.dot(arm.link_masses, mids) / arm.mass
    com = arm_com(arm, np.zeros(5))
    np.testing.assert_allclose(com, [expected_x, 0.0, -0.08], atol=1e-12)


def test_arm_com_x_matches_full_com(arm, random_q):
    q = random_q()
    assert arm_com_x(arm, q) == pytest.approx(arm_com(arm, q)[0])


def test_arm_com_stays_within_reach(arm, rng):
    mount = np.array([0.10, 0.0, -0.08])
    for _ in range(50):
        com = arm_com(arm, sample_joints(rng, arm))
        assert np.linalg.norm(com - mount) <= arm.reach


# ---------------------------------------------------------------------------
# battery carriage


def test_carriage_validation():
    with pytest.raises(ValueError):
        BatteryCarriage(mass=0.0)
    with pytest.raises(ValueError):
        BatteryCarriage(travel=-0.1)
    with pytest.raises(ValueError):
        BatteryCarriage(time_constant=0.0)


def test_battery_setpoint_affine_example(carriage):
    # gain = -1.5/1.75; arm CoM at +0.10 m commands the battery back by
    # 0.0857 m.
    value, saturated = battery_setpoint(carriage, 0.10)
    assert value == pytest.approx(-0.0857142857, abs=1e-9)
    assert not saturated


def test_battery_setpoint_saturates_at_travel(carriage):
    value, saturated = battery_setpoint(carriage, 0.50)
    assert value == -carriage.travel
    assert saturated
    value, saturated = battery_setpoint(carriage, -0.50)
    assert value == carriage.travel
    assert saturated


def test_combined_com_invariant_when_unsaturated(arm, carriage, rng):
    # With gain = -m_arm/m_batt the combined first moment collapses to
    # m_batt * offset, so the combined CoM x must not move with the
    # configuration while the carriage has travel authority.
    baseline = carriage.mass * carriage.offset / (arm.mass + carriage.mass)
    checked = 0
    for _ in range(200):
        q = sample_joints(rng, arm)
        _, saturated = battery_setpoint(carriage, arm_com_x(arm, q))
        if saturated:
            continue
        checked += 1
        assert combined_com_x(arm, carriage, q) == pytest.approx(baseline, abs=1e-12)
    assert checked > 20


def test_combined_com_with_explicit_battery_position(arm, carriage):
    q = np.zeros(5)
    x = combined_com_x(arm, carriage, q, battery_x=0.0)
    expected = arm.mass * arm_com_x(arm, q) / (arm.mass + carriage.mass)
    assert x == pytest.approx(expected)


@settings(max_examples=100, deadline=None)
@given(st.floats(-2.0, 2.0, allow_nan=False))
def test_battery_setpoint_always_within_travel(com_x):
    carriage = BatteryCarriage()
    value, _ = battery_setpoint(carriage, com_x)
    assert -carriage.travel <= value <= carriage.travel
