"""Kinematic model of the 5-DoF manipulator and its battery carriage.

The arm is a serial chain of revolute joints.  Joint ``i`` rotates about a
configurable unit axis expressed in the frame of the previous link, then
the chain advances ``link_offsets[i]`` metres along the rotated local
x-axis.  A rigid tool tip extends ``tool_offset`` metres beyond the last
link.  All outputs are expressed in the vehicle base frame.

The battery carriage is a single prismatic stage along the base x-axis
used to counter-shift the arm's centre of mass: moving 1.5 kg of arm
forward can be balanced by sliding 1.75 kg of battery backward, which is
the ``gain = -m_arm / m_battery`` affine law implemented by
:func:`battery_setpoint`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spatial import cross3, Pose, quat_from_axis_angle

__all__ = [
    "ArmModel",
    "BatteryCarriage",
    "forward_kinematics",
    "jacobian",
    "jacobian_dot",
    "jacobian_and_dot",
    "arm_com",
    "arm_com_x",
    "com_from_chain",
    "battery_setpoint",
]

_X = np.array([1.0, 0.0, 0.0])
_Y = np.array([0.0, 1.0, 0.0])
_Z = np.array([0.0, 0.0, 1.0])


def _axis_angle_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    c = np.cos(angle)
    s = np.sin(angle)
    ax, ay, az = axis
    cc = 1.0 - c
    return np.array(
        [
            [c + ax * ax * cc, ax * ay * cc - az * s, ax * az * cc + ay * s],
            [ay * ax * cc + az * s, c + ay * ay * cc, ay * az * cc - ax * s],
            [az * ax * cc - ay * s, az * ay * cc + ax * s, c + az * az * cc],
        ]
    )


@dataclass
class ArmModel:
    """Geometry, mass distribution and limits of the serial arm.

    Defaults give a 0.75 m reach chain (shoulder yaw, three pitches,
    wrist roll) massing 1.5 kg with per-link CoM at mid-link.
    """

    joint_axes: np.ndarray = field(
        default_factory=lambda: np.array([_Z, _Y, _Y, _Y, _X])
    )
    link_offsets: np.ndarray = field(
        default_factory=lambda: np.array([0.10, 0.25, 0.25, 0.10, 0.0])
    )
    tool_offset: float = 0.05
    link_masses: np.ndarray = field(
        default_factory=lambda: np.array([0.4, 0.4, 0.3, 0.25, 0.15])
    )
    com_offsets: np.ndarray | None = None
    """Per-link CoM offset along the rotated local x-axis; None = mid-link."""
    joint_lower: np.ndarray = field(
        default_factory=lambda: np.array([-2.9, -2.2, -2.9, -2.4, -2.9])
    )
    joint_upper: np.ndarray = field(
        default_factory=lambda: np.array([2.9, 2.2, 2.9, 2.4, 2.9])
    )
    mount: Pose = field(default_factory=lambda: Pose(np.array([0.10, 0.0, -0.08])))
    servo_natural_freq: float = 20.0
    servo_damping: float = 1.0
    servo_rate_limit: float = 2.5

    def __post_init__(self) -> None:
        self.joint_axes = np.asarray(self.joint_axes, dtype=float).reshape(-1, 3)
        n = self.joint_axes.shape[0]
        norms = np.linalg.norm(self.joint_axes, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("joint axes must be unit vectors")
        self.link_offsets = np.asarray(self.link_offsets, dtype=float).reshape(n)
        if np.any(self.link_offsets < 0.0) or self.tool_offset < 0.0:
            raise ValueError("link and tool offsets must be non-negative")
        self.link_masses = np.asarray(self.link_masses, dtype=float).reshape(n)
        if np.any(self.link_masses < 0.0) or self.link_masses.sum() <= 0.0:
            raise ValueError("link masses must be non-negative with positive total")
        if self.com_offsets is None:
            self.com_offsets = 0.5 * self.link_offsets
        self.com_offsets = np.asarray(self.com_offsets, dtype=float).reshape(n)
        self.joint_lower = np.asarray(self.joint_lower, dtype=float).reshape(n)
        self.joint_upper = np.asarray(self.joint_upper, dtype=float).reshape(n)
        if np.any(self.joint_lower >= self.joint_upper):
            raise ValueError("joint limits must satisfy lower < upper")
        if self.reach <= 0.0:
            raise ValueError("arm must have positive reach")
        if self.servo_natural_freq <= 0.0 or self.servo_damping <= 0.0:
            raise ValueError("servo model parameters must be positive")
        if self.servo_rate_limit <= 0.0:
            raise ValueError("servo rate limit must be positive")

    @property
    def dof(self) -> int:
        return self.joint_axes.shape[0]

    @property
    def reach(self) -> float:
        return float(self.link_offsets.sum() + self.tool_offset)

    @property
    def mass(self) -> float:
        return float(self.link_masses.sum())

    def check_limits(self, q: np.ndarray) -> None:
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise ValueError(f"expected {self.dof} joint values, got shape {q.shape}")
        if np.any(q < self.joint_lower - 1e-12) or np.any(q > self.joint_upper + 1e-12):
            bad = np.where((q < self.joint_lower) | (q > self.joint_upper))[0]
            raise ValueError(f"joint position outside limits at indices {bad.tolist()}: {q[bad]}")

    def clamp(self, q: np.ndarray) -> np.ndarray:
        return np.clip(q, self.joint_lower, self.joint_upper)


def _chain(arm: ArmModel, q: np.ndarray):
    """Joint origins, world joint axes, link-end rotations and tip position.

    Returns ``(origins, axes, rotations, tip)`` where ``origins[i]`` is the
    position of joint ``i``, ``axes[i]`` its rotation axis in the base
    frame, and ``rotations[i]`` the orientation of link ``i``.
    """
    n = arm.dof
    origins = np.empty((n, 3))
    axes = np.empty((n, 3))
    rotations = np.empty((n, 3, 3))
    rot = arm.mount.rotation()
    pos = arm.mount.position.copy()
    for i in range(n):
        origins[i] = pos
        axes[i] = rot @ arm.joint_axes[i]
        rot = rot @ _axis_angle_matrix(arm.joint_axes[i], float(q[i]))
        rotations[i] = rot
        pos = pos + rot[:, 0] * arm.link_offsets[i]
    tip = pos + rot[:, 0] * arm.tool_offset
    return origins, axes, rotations, tip


def _rot_to_quat(rot: np.ndarray) -> np.ndarray:
    """Rotation matrix to unit quaternion, robust near 180-degree turns."""
    w = np.sqrt(max(0.0, 1.0 + rot[0, 0] + rot[1, 1] + rot[2, 2])) / 2.0
    if w > 1e-6:
        return np.array(
            [
                w,
                (rot[2, 1] - rot[1, 2]) / (4 * w),
                (rot[0, 2] - rot[2, 0]) / (4 * w),
                (rot[1, 0] - rot[0, 1]) / (4 * w),
            ]
        )
    # 180-degree corner case, take the dominant diagonal branch
    i = int(np.argmax(np.diag(rot)))
    j, k = (i + 1) % 3, (i + 2) % 3
    s = np.sqrt(max(1e-15, 1.0 + rot[i, i] - rot[j, j] - rot[k, k])) * 2.0
    quat = np.empty(4)
    quat[0] = (rot[k, j] - rot[j, k]) / s
    quat[1 + i] = 0.25 * s
    quat[1 + j] = (rot[j, i] + rot[i, j]) / s
    quat[1 + k] = (rot[k, i] + rot[i, k]) / s
    return quat


def forward_kinematics(arm: ArmModel, q: np.ndarray) -> Pose:
    """Tool pose in the base frame; raises for out-of-limit joints."""
    arm.check_limits(q)
    _, _, rotations, tip = _chain(arm, q)
    return Pose(tip, _rot_to_quat(rotations[-1]))


def jacobian(arm: ArmModel, q: np.ndarray) -> np.ndarray:
    """Geometric Jacobian (6 x dof), translational rows stacked first."""
    origins, axes, _, tip = _chain(arm, q)
    jac = np.empty((6, arm.dof))
    for i in range(arm.dof):
        jac[:3, i] = cross3(axes[i], tip - origins[i])
        jac[3:, i] = axes[i]
    return jac


def jacobian_and_dot(
    arm: ArmModel, q: np.ndarray, qdot: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Geometric Jacobian and its time derivative from one chain pass.

    The derivative is built recursively from the material velocities of
    the joint origins and the rotating joint axes, so it matches a
    central-difference of :func:`jacobian` to finite-difference accuracy.
    """
    qdot = np.asarray(qdot, dtype=float)
    origins, axes, _, tip = _chain(arm, q)
    n = arm.dof
    omega = np.zeros(3)  # angular velocity of link i-1
    axis_dot = np.empty((n, 3))
    origin_dot = np.empty((n, 3))
    vel = np.zeros(3)  # velocity of the current joint origin
    for i in range(n):
        origin_dot[i] = vel
        axis_dot[i] = cross3(omega, axes[i])
        omega = omega + axes[i] * qdot[i]
        if i + 1 < n:
            vel = vel + cross3(omega, origins[i + 1] - origins[i])
    tip_dot = vel + cross3(omega, tip - origins[-1])
    jac = np.empty((6, n))
    jac_dot = np.empty((6, n))
    for i in range(n):
        r = tip - origins[i]
        jac[:3, i] = cross3(axes[i], r)
        jac[3:, i] = axes[i]
        jac_dot[:3, i] = cross3(axis_dot[i], r) + cross3(axes[i], tip_dot - origin_dot[i])
        jac_dot[3:, i] = axis_dot[i]
    return jac, jac_dot


def jacobian_dot(arm: ArmModel, q: np.ndarray, qdot: np.ndarray) -> np.ndarray:
    """Time derivative of the geometric Jacobian along ``qdot``."""
    return jacobian_and_dot(arm, q, qdot)[1]


def com_from_chain(arm: ArmModel, origins: np.ndarray, rotations: np.ndarray) -> np.ndarray:
    """Arm centre of mass from an already-computed kinematic chain."""
    weighted = np.zeros(3)
    for i in range(arm.dof):
        com_i = origins[i] + rotations[i][:, 0] * arm.com_offsets[i]
        weighted += arm.link_masses[i] * com_i
    return weighted / arm.mass


def arm_com(arm: ArmModel, q: np.ndarray) -> np.ndarray:
    """Arm centre of mass in the base frame."""
    origins, _, rotations, _ = _chain(arm, q)
    return com_from_chain(arm, origins, rotations)


def arm_com_x(arm: ArmModel, q: np.ndarray) -> float:
    """x-coordinate of the arm CoM, the input to the battery carriage law."""
    return float(arm_com(arm, q)[0])


@dataclass
class BatteryCarriage:
    """Prismatic battery stage sliding along the base x-axis."""

    mass: float = 1.75
    gain: float = -1.5 / 1.75
    offset: float = 0.0
    """Carriage position commanded when the arm CoM x is zero."""
    travel: float = 0.25
    """Symmetric travel limit [m]; setpoints are clamped to +/- travel."""
    time_constant: float = 0.2

    def __post_init__(self) -> None:
        if self.mass <= 0.0:
            raise ValueError("battery mass must be positive")
        if self.travel <= 0.0:
            raise ValueError("carriage travel must be positive")
        if self.time_constant <= 0.0:
            raise ValueError("carriage time constant must be positive")


def battery_setpoint(carriage: BatteryCarriage, com_x: float) -> tuple[float, bool]:
    """Carriage position for a given arm CoM x-coordinate.

    Affine law ``offset + gain * com_x`` clamped to the travel range;
    the second return value flags saturation.
    """
    raw = carriage.offset + carriage.gain * com_x
    if raw > carriage.travel:
        return carriage.travel, True
    if raw < -carriage.travel:
        return -carriage.travel, True
    return raw, False


def combined_com_x(arm: ArmModel, carriage: BatteryCarriage, q: np.ndarray,
                   battery_x: float | None = None) -> float:
    """x-coordinate of the joint arm+battery centre of mass.

    With ``gain = -m_arm / m_battery`` and an unsaturated carriage this is
    independent of the arm configuration.
    """
    if battery_x is None:
        battery_x, _ = battery_setpoint(carriage, arm_com_x(arm, q))
    total = arm.mass + carriage.mass
    return (arm.mass * arm_com_x(arm, q) + carriage.mass * battery_x) / total
