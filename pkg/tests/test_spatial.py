"""Quaternion algebra, poses and the damped pseudo-inverse."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uamsim.spatial import (
    Pose,
    cross3,
    damped_pinv,
    numeric_jacobian,
    quat_conjugate,
    quat_from_axis_angle,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    quat_to_matrix,
    quat_to_rotvec,
    rotvec_from_matrix,
    skew,
)

finite_floats = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)


def unit_quats():
    return st.lists(
        st.floats(-1.0, 1.0, allow_nan=False), min_size=4, max_size=4
    ).map(np.array).filter(lambda q: np.linalg.norm(q) > 1e-3).map(quat_normalize)


# ---------------------------------------------------------------------------
# vectors


def test_skew_matches_cross_product(rng):
    for _ in range(20):
        a, b = rng.normal(size=3), rng.normal(size=3)
        np.testing.assert_allclose(skew(a) @ b, np.cross(a, b), atol=1e-15)


def test_cross3_matches_numpy(rng):
    a, b = rng.normal(size=3), rng.normal(size=3)
    np.testing.assert_allclose(cross3(a, b), np.cross(a, b), atol=1e-15)


# ---------------------------------------------------------------------------
# quaternions


def test_quat_normalize_unit_norm():
    q = quat_normalize(np.array([2.0, 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(q, [1.0, 0.0, 0.0, 0.0])


def test_quat_normalize_rejects_zero():
    with pytest.raises(ValueError):
        quat_normalize(np.zeros(4))


def test_quat_rotate_matches_matrix(rng):
    for _ in range(30):
        q = quat_normalize(rng.normal(size=4))
        v = rng.normal(size=3)
        np.testing.assert_allclose(quat_rotate(q, v), quat_to_matrix(q) @ v, atol=1e-12)


def test_quat_multiply_composes_rotations(rng):
    a = quat_normalize(rng.normal(size=4))
    b = quat_normalize(rng.normal(size=4))
    v = rng.normal(size=3)
    np.testing.assert_allclose(
        quat_rotate(quat_multiply(a, b), v),
        quat_rotate(a, quat_rotate(b, v)),
        atol=1e-12,
    )


def test_quat_conjugate_inverts():
    q = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), 0.7)
    ident = quat_multiply(q, quat_conjugate(q))
    np.testing.assert_allclose(ident, [1.0, 0.0, 0.0, 0.0], atol=1e-15)


def test_axis_angle_quarter_turn_about_z():
    q = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), np.pi / 2)
    np.testing.assert_allclose(quat_rotate(q, np.array([1.0, 0.0, 0.0])),
                               [0.0, 1.0, 0.0], atol=1e-15)


def test_rotvec_round_trip():
    axis = np.array([1.0, 2.0, -0.5])
    axis /= np.linalg.norm(axis)
    for angle in (0.0, 1e-8, 0.3, 2.0, np.pi - 1e-6):
        q = quat_from_axis_angle(axis, angle)
        np.testing.assert_allclose(quat_to_rotvec(q), axis * angle,
                                   atol=1e-9, rtol=1e-6)


def test_rotvec_canonical_angle_range():
    # 350 degrees comes back as the short way round: -10 degrees.
    axis = np.array([0.0, 1.0, 0.0])
    rv = quat_to_rotvec(quat_from_axis_angle(axis, np.deg2rad(350.0)))
    np.testing.assert_allclose(rv, -axis * np.deg2rad(10.0), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(unit_quats())
def test_rotvec_angle_never_exceeds_pi(q):
    assert np.linalg.norm(quat_to_rotvec(q)) <= np.pi + 1e-9


def test_rotvec_from_matrix_matches_quaternion_path(rng):
    for _ in range(30):
        q = quat_normalize(rng.normal(size=4))
        rv_mat = rotvec_from_matrix(quat_to_matrix(q))
        rv_quat = quat_to_rotvec(q)
        np.testing.assert_allclose(rv_mat, rv_quat, atol=1e-7)


def test_rotvec_from_matrix_half_turn():
    rot = np.diag([1.0, -1.0, -1.0])  # 180 degrees about x
    rv = rotvec_from_matrix(rot)
    np.testing.assert_allclose(np.abs(rv), [np.pi, 0.0, 0.0], atol=1e-9)


# ---------------------------------------------------------------------------
# poses


def test_pose_compose_inverse_is_identity(rng):
    p = Pose(rng.normal(size=3), quat_normalize(rng.normal(size=4)))
    ident = p.compose(p.inverse())
    np.testing.assert_allclose(ident.position, 0.0, atol=1e-12)
    np.testing.assert_allclose(np.abs(ident.orientation[0]), 1.0, atol=1e-12)


def test_pose_transform_point_matches_compose(rng):
    p = Pose(rng.normal(size=3), quat_normalize(rng.normal(size=4)))
    x = rng.normal(size=3)
    np.testing.assert_allclose(
        p.transform_point(x), p.rotation() @ x + p.position, atol=1e-12
    )


def test_pose_default_orientation_is_identity():
    p = Pose(np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(p.rotation(), np.eye(3))


def test_pose_copy_is_independent():
    p = Pose(np.zeros(3))
    c = p.copy()
    c.position[0] = 5.0
    assert p.position[0] == 0.0


# ---------------------------------------------------------------------------
# damped pseudo-inverse


def test_damped_pinv_rank_deficient_example():
    # For diag(1, 0) with damping 0.1 the regularised inverse is
    # diag(1/1.01, 0): the zero direction stays exactly zero.
    mat = np.array([[1.0, 0.0], [0.0, 0.0]])
    expected = np.array([[1.0 / 1.01, 0.0], [0.0, 0.0]])
    np.testing.assert_allclose(damped_pinv(mat, 0.1), expected, atol=1e-15)


def test_damped_pinv_zero_damping_is_exact_pinv(rng):
    for shape in [(6, 5), (5, 6), (4, 4), (2, 7)]:
        mat = rng.normal(size=shape)
        np.testing.assert_allclose(
            damped_pinv(mat, 0.0), np.linalg.pinv(mat), atol=1e-9
        )


def test_damped_pinv_zero_damping_satisfies_pseudoinverse_axioms(rng):
    mat = rng.normal(size=(6, 5))
    pinv = damped_pinv(mat, 0.0)
    np.testing.assert_allclose(mat @ pinv @ mat, mat, atol=1e-9)
    np.testing.assert_allclose(pinv @ mat @ pinv, pinv, atol=1e-9)
    np.testing.assert_allclose((mat @ pinv).T, mat @ pinv, atol=1e-9)
    np.testing.assert_allclose((pinv @ mat).T, pinv @ mat, atol=1e-9)


def test_damped_pinv_transpose_symmetry(rng):
    # The wide and tall formulations agree: pinv(A^T) = pinv(A)^T.
    mat = rng.normal(size=(6, 5))
    np.testing.assert_allclose(
        damped_pinv(mat.T, 0.05), damped_pinv(mat, 0.05).T, atol=1e-10
    )


def test_damped_pinv_shrinks_near_singularity():
    # Damping bounds the gain through a vanishing singular value.
    mat = np.diag([1.0, 1e-6])
    out = damped_pinv(mat, 0.01)
    assert out[1, 1] < 0.01  # 1e-6 / (1e-12 + 1e-4) ~ 0.01, not 1e6
    assert out[0, 0] == pytest.approx(1.0 / (1.0 + 1e-4))


def test_damped_pinv_input_validation():
    with pytest.raises(ValueError):
        damped_pinv(np.array([1.0, 2.0]))  # not 2-D
    with pytest.raises(ValueError):
        damped_pinv(np.array([[np.nan, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        damped_pinv(np.eye(2), damping=-0.1)


@settings(max_examples=50, deadline=None)
@given(st.lists(finite_floats, min_size=6, max_size=6),
       st.floats(1e-4, 1.0, allow_nan=False))
def test_damped_pinv_never_amplifies_beyond_damping_bound(entries, damping):
    # ||pinv_damped|| <= 1 / (2 * damping) for every matrix: the scalar map
    # s / (s^2 + d^2) peaks at s = d.
    mat = np.array(entries).reshape(2, 3)
    out = damped_pinv(mat, damping)
    assert np.linalg.norm(out, 2) <= 1.0 / (2.0 * damping) + 1e-9


# ---------------------------------------------------------------------------
# numeric differentiation


def test_numeric_jacobian_on_polynomial():
    def f(x):
        return np.array([x[0] ** 2, x[0] * x[1], np.sin(x[1])])

    x0 = np.array([1.2, -0.7])
    expected = np.array([
        [2 * x0[0], 0.0],
        [x0[1], x0[0]],
        [0.0, np.cos(x0[1])],
    ])
    np.testing.assert_allclose(numeric_jacobian(f, x0), expected, atol=1e-8)
