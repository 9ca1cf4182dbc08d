"""Small spatial-math toolbox shared by every other module.

Conventions
-----------
* Quaternions are stored as ``[w, x, y, z]`` (scalar first) and kept unit
  norm.  Rotation matrices are world-from-local unless stated otherwise.
* Twists and wrenches stack the translational block on top of the angular
  block: ``[vx, vy, vz, wx, wy, wz]`` and ``[fx, fy, fz, mx, my, mz]``.
* Matrices are plain ``numpy.ndarray``; nothing here ever exceeds the
  6 x 8 shapes used by the task-space and rotor-allocation solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Pose",
    "damped_pinv",
    "numeric_jacobian",
    "skew",
    "cross3",
    "quat_normalize",
    "quat_multiply",
    "quat_conjugate",
    "quat_rotate",
    "quat_to_matrix",
    "quat_from_axis_angle",
    "quat_to_rotvec",
    "rotvec_from_matrix",
]

_UNIT_TOL = 1e-9


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix such that ``skew(a) @ b == np.cross(a, b)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product of two 3-vectors.

    Equivalent to ``np.cross`` for this shape but an order of magnitude
    faster; the generic ufunc dominates the physics loop otherwise.
    """
    a0, a1, a2 = a
    b0, b1, b2 = b
    return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = float(np.linalg.norm(q))
    if not np.isfinite(n) or n < 1e-12:
        raise ValueError(f"cannot normalize quaternion with norm {n}")
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product ``a * b`` (applies ``b`` first, then ``a``)."""
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


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate a 3-vector by a unit quaternion."""
    w = q[0]
    u = q[1:]
    return v + 2.0 * cross3(u, cross3(u, v) + w * v)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        raise ValueError("rotation axis must be non-zero")
    half = 0.5 * angle
    return np.concatenate(([np.cos(half)], np.sin(half) / n * axis))


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle, radians) of a unit quaternion.

    The sign of the scalar part is canonicalized first so the returned
    angle lies in ``[0, pi]``.
    """
    if q[0] < 0.0:
        q = -q
    w = min(1.0, float(q[0]))
    s = float(np.linalg.norm(q[1:]))
    if s < 1e-12:
        # Small-angle regime: sin(theta/2) ~= theta/2.
        return 2.0 * np.asarray(q[1:], dtype=float)
    angle = 2.0 * np.arctan2(s, w)
    return (angle / s) * np.asarray(q[1:], dtype=float)


def rotvec_from_matrix(rot: np.ndarray) -> np.ndarray:
    """Rotation vector of a 3x3 rotation matrix (via its quaternion)."""
    m = np.asarray(rot, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    else:
        i = int(np.argmax([m[0, 0], m[1, 1], m[2, 2]]))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(1e-15, 1.0 + m[i, i] - m[j, j] - m[k, k])) * 2.0
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    return quat_to_rotvec(quat_normalize(q))


@dataclass
class Pose:
    """Rigid transform: ``position`` plus a unit ``orientation`` quaternion.

    The orientation is renormalized on construction and after every
    composition so that arbitrary chains stay unit norm to 1e-9.
    """

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.orientation = quat_normalize(np.asarray(self.orientation, dtype=float).reshape(4))
        if not np.all(np.isfinite(self.position)):
            raise ValueError("pose position must be finite")

    def compose(self, other: "Pose") -> "Pose":
        """``self`` then ``other`` in the local frame (``T_self @ T_other``)."""
        return Pose(
            self.position + quat_rotate(self.orientation, other.position),
            quat_multiply(self.orientation, other.orientation),
        )

    def inverse(self) -> "Pose":
        q_inv = quat_conjugate(self.orientation)
        return Pose(-quat_rotate(q_inv, self.position), q_inv)

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return self.position + quat_rotate(self.orientation, p)

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def copy(self) -> "Pose":
        return Pose(self.position.copy(), self.orientation.copy())


def damped_pinv(mat: np.ndarray, damping: float = 1e-3) -> np.ndarray:
    """Damped least-squares pseudo-inverse.

    For a wide or square matrix ``M`` this returns
    ``M.T @ inv(M @ M.T + damping**2 * I)``; for a tall matrix the dual
    form ``inv(M.T @ M + damping**2 * I) @ M.T`` is used so the damping
    always regularizes the smaller Gram matrix.  ``damping == 0`` falls
    back to the exact Moore-Penrose inverse computed through a
    rank-revealing SVD, which stays defined for singular inputs.
    """
    m = np.asarray(mat, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    if damping < 0.0 or not np.isfinite(damping):
        raise ValueError(f"damping must be finite and >= 0, got {damping}")
    if damping == 0.0:
        return np.linalg.pinv(m)
    rows, cols = m.shape
    lam2 = damping * damping
    if rows <= cols:
        gram = m @ m.T + lam2 * np.eye(rows)
        return m.T @ np.linalg.inv(gram)
    gram = m.T @ m + lam2 * np.eye(cols)
    return np.linalg.inv(gram) @ m.T


def numeric_jacobian(func, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``func`` at ``x``.

    Intended as an independent cross-check for analytic Jacobians; the
    O(h^2) truncation error of the symmetric difference makes 1e-6 steps
    accurate to roughly 1e-12 on smooth kinematic maps.
    """
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(func(x), dtype=float)
    jac = np.empty((f0.size, x.size))
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        f_plus = np.asarray(func(x + step), dtype=float)
        f_minus = np.asarray(func(x - step), dtype=float)
        jac[:, i] = (f_plus - f_minus) / (2.0 * h)
    return jac
