"""Parallel force-impedance control of the manipulator tool point.

The 6-D task space is split into two orthogonal subspaces selected by
matrices with orthonormal columns:

* ``s_f`` (6 x 1) spans the translational approach axis where an explicit
  force loop regulates the contact force, and
* ``s_v`` (6 x 5) spans the complementary directions where a Cartesian
  impedance shapes the motion.

Both control actions are expressed as joint-space accelerations through a
damped pseudo-inverse of the geometric Jacobian and are simply summed;
each law is projected onto its own subspace, so the two loops cannot
fight each other.  The resulting acceleration is double-integrated
(semi-implicit Euler) into joint position references for the servos.

During contact-free flight the controller runs in impedance-only mode: a
full 6-D impedance (the selection matrices degenerate to the identity)
with the force action gated to zero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .arm import ArmModel
from .spatial import Pose, damped_pinv, quat_conjugate, quat_multiply, quat_to_rotvec

__all__ = [
    "ControlMode",
    "SubspaceSplit",
    "ImpedanceGains",
    "ForceGains",
    "ControllerState",
    "make_subspace_split",
    "full_motion_split",
    "pose_error",
    "force_error",
    "lambda_dot",
    "impedance_law",
    "force_law",
    "parallel_step",
]

_AXIS_NAMES = ("x", "y", "z")


class ControlMode(enum.Enum):
    IMPEDANCE_ONLY = "impedance_only"
    PARALLEL = "parallel"


@dataclass(frozen=True)
class SubspaceSplit:
    """Orthogonal partition of task space into motion and force directions."""

    s_v: np.ndarray
    s_f: np.ndarray
    force_axis: int | None

    @property
    def n_v(self) -> int:
        return self.s_v.shape[1]

    @property
    def n_f(self) -> int:
        return self.s_f.shape[1]

    def motion_coords(self, vec: np.ndarray) -> np.ndarray:
        """Project a 6-vector onto the motion subspace (``s_v`` pinv)."""
        return self.s_v.T @ vec

    def force_coords(self, vec: np.ndarray) -> np.ndarray:
        return self.s_f.T @ vec


def make_subspace_split(axis: int) -> SubspaceSplit:
    """Split with one force-controlled translational axis (0=x, 1=y, 2=z).

    The force selector is the corresponding basis column; the motion
    selector keeps the remaining five columns of the identity in
    ascending order.  Columns are orthonormal, so the pseudo-inverses
    used throughout reduce to transposes.
    """
    if not isinstance(axis, (int, np.integer)) or axis < 0 or axis > 2:
        raise ValueError(f"force axis must be 0, 1 or 2, got {axis!r}")
    eye = np.eye(6)
    s_f = eye[:, [axis]]
    keep = [i for i in range(6) if i != axis]
    s_v = eye[:, keep]
    return SubspaceSplit(s_v=s_v, s_f=s_f, force_axis=int(axis))


def full_motion_split() -> SubspaceSplit:
    """Degenerate split used in impedance-only mode: all six directions
    are motion-controlled and the force subspace is empty."""
    return SubspaceSplit(s_v=np.eye(6), s_f=np.zeros((6, 0)), force_axis=None)


def _require_spd(mat: np.ndarray, name: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square, got shape {mat.shape}")
    if not np.allclose(mat, mat.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    if mat.shape[0] > 0:
        eigs = np.linalg.eigvalsh(mat)
        if eigs.min() <= 0.0:
            raise ValueError(
                f"{name} must be positive definite; smallest eigenvalue {eigs.min():.3e}"
            )
    return mat


def _selected_diag(split_cols: np.ndarray, linear: float, angular: float) -> np.ndarray:
    """Diagonal gain block restricted to the axes a selector picks out.

    The full-task gain is conceptually ``diag(linear * I3, angular * I3)``;
    selecting a subset of axes keeps the matching diagonal entries.
    """
    axes = np.argmax(split_cols != 0.0, axis=0)
    return np.diag([linear if a < 3 else angular for a in axes])


@dataclass
class ImpedanceGains:
    """Desired inertia / stiffness / damping on the motion subspace."""

    inertia: np.ndarray
    stiffness: np.ndarray
    damping: np.ndarray

    def __post_init__(self) -> None:
        self.inertia = _require_spd(self.inertia, "impedance inertia")
        self.stiffness = _require_spd(self.stiffness, "impedance stiffness")
        self.damping = _require_spd(self.damping, "impedance damping")
        if not (self.inertia.shape == self.stiffness.shape == self.damping.shape):
            raise ValueError("impedance gain blocks must share one shape")

    @classmethod
    def from_axis_gains(
        cls,
        split: SubspaceSplit,
        inertia: tuple[float, float] = (0.5, 0.001),
        stiffness: tuple[float, float] = (30.0, 0.1),
        damping: tuple[float, float] = (7.0, 0.2),
    ) -> "ImpedanceGains":
        """Build the n_v x n_v blocks from (linear, angular) diagonal pairs."""
        return cls(
            inertia=_selected_diag(split.s_v, *inertia),
            stiffness=_selected_diag(split.s_v, *stiffness),
            damping=_selected_diag(split.s_v, *damping),
        )


@dataclass
class ForceGains:
    """Direct force loop gains and the assumed contact compliance."""

    k_p: np.ndarray
    k_d: np.ndarray
    compliance: np.ndarray
    """6 x 6 symmetric PSD map from force error to position-scale correction."""

    def __post_init__(self) -> None:
        self.k_p = _require_spd(self.k_p, "force proportional gain")
        self.k_d = _require_spd(self.k_d, "force derivative gain")
        self.compliance = np.asarray(self.compliance, dtype=float)
        if self.compliance.shape != (6, 6):
            raise ValueError("compliance must be 6x6")
        if not np.allclose(self.compliance, self.compliance.T, atol=1e-12):
            raise ValueError("compliance must be symmetric")
        if np.linalg.eigvalsh(self.compliance).min() < -1e-12:
            raise ValueError("compliance must be positive semi-definite")

    @classmethod
    def from_axis_gains(
        cls,
        split: SubspaceSplit,
        k_p: tuple[float, float] = (0.25, 0.5),
        k_d: tuple[float, float] = (0.1, 0.1),
        axis_compliance: float = 1e-3,
    ) -> "ForceGains":
        if split.force_axis is None:
            raise ValueError("force gains require a split with a force axis")
        if axis_compliance <= 0.0:
            raise ValueError(
                f"compliance on the force-controlled {_AXIS_NAMES[split.force_axis]}-axis "
                "must be positive"
            )
        compliance = np.zeros((6, 6))
        compliance[split.force_axis, split.force_axis] = axis_compliance
        return cls(
            k_p=_selected_diag(split.s_f, *k_p),
            k_d=_selected_diag(split.s_f, *k_d),
            compliance=compliance,
        )


@dataclass
class ControllerState:
    """Integrator and filter memory carried between control ticks."""

    q_ref: np.ndarray
    qdot_ref: np.ndarray
    prev_force_error: np.ndarray = field(default_factory=lambda: np.zeros(6))
    lambda_filter: np.ndarray = field(default_factory=lambda: np.zeros(1))
    wrench_filter: np.ndarray = field(default_factory=lambda: np.zeros(6))
    mode: ControlMode = ControlMode.IMPEDANCE_ONLY

    def __post_init__(self) -> None:
        self.q_ref = np.asarray(self.q_ref, dtype=float).copy()
        self.qdot_ref = np.asarray(self.qdot_ref, dtype=float).copy()


def filter_wrench(
    state: ControllerState, wrench: np.ndarray, dt: float, cutoff_hz: float
) -> np.ndarray:
    """First-order low-pass of the measured wrench used by the control laws.

    Both laws scale the wrench by inverses of small virtual inertias (the
    angular block is 1e-3), so raw sensor noise would be amplified into
    visible reference jitter; the loops themselves live well below this
    cutoff.  Updates ``state.wrench_filter`` in place and returns it.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if cutoff_hz <= 0.0:
        raise ValueError("filter cutoff must be positive")
    tau = 1.0 / (2.0 * np.pi * cutoff_hz)
    alpha = dt / (tau + dt)
    state.wrench_filter = state.wrench_filter + alpha * (
        np.asarray(wrench, dtype=float) - state.wrench_filter
    )
    return state.wrench_filter


def pose_error(reference: Pose, actual: Pose) -> np.ndarray:
    """6-D task error: translational difference stacked over the rotation
    vector of the relative orientation (reference relative to actual)."""
    err = np.empty(6)
    err[:3] = reference.position - actual.position
    err[3:] = quat_to_rotvec(
        quat_multiply(reference.orientation, quat_conjugate(actual.orientation))
    )
    return err


def force_error(f_measured: np.ndarray, f_desired: np.ndarray) -> np.ndarray:
    """Wrench-shaped force error: measured minus desired force over a zero
    moment block (the force loop never regulates contact moments)."""
    err = np.zeros(6)
    err[:3] = np.asarray(f_measured, dtype=float) - np.asarray(f_desired, dtype=float)
    return err


def lambda_dot(
    split: SubspaceSplit,
    force_err: np.ndarray,
    prev_force_err: np.ndarray,
    dt: float,
    filter_state: np.ndarray,
    cutoff_hz: float | None = 20.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Filtered force-error rate on the force subspace.

    The raw rate is the backward difference of ``s_f+ e_F`` over one
    control period, passed through a first-order low-pass (default
    cutoff 20 Hz).  ``cutoff_hz=None`` bypasses the filter.
    Returns ``(lambda_dot, new_filter_state)``.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    raw = split.s_f.T @ ((force_err - prev_force_err) / dt)
    if cutoff_hz is None:
        return raw, raw
    if cutoff_hz <= 0.0:
        raise ValueError("filter cutoff must be positive (or None to bypass)")
    tau = 1.0 / (2.0 * np.pi * cutoff_hz)
    alpha = dt / (tau + dt)
    state = np.asarray(filter_state, dtype=float).reshape(raw.shape)
    new_state = state + alpha * (raw - state)
    return new_state, new_state


def impedance_law(
    jac: np.ndarray,
    jac_dot: np.ndarray,
    qdot: np.ndarray,
    split: SubspaceSplit,
    gains: ImpedanceGains,
    err: np.ndarray,
    err_dot: np.ndarray,
    accel_ref: np.ndarray,
    wrench_ext: np.ndarray,
    jac_damping: float = 1e-3,
) -> np.ndarray:
    """Motion-subspace impedance as a joint acceleration.

    Implements ``u_q = J+ (S_v a_v - Jdot qdot)`` with

    ``a_v = M^-1 (M S_v+ xddot_ref + K_D S_v+ err_dot + K_P S_v+ err - S_v+ F_ext)``

    so the closed loop behaves like a mass-spring-damper on the motion
    subspace with the measured wrench as its forcing term.
    """
    sv_t = split.s_v.T
    accel_v = sv_t @ accel_ref + np.linalg.solve(
        gains.inertia,
        gains.damping @ (sv_t @ err_dot)
        + gains.stiffness @ (sv_t @ err)
        - sv_t @ wrench_ext,
    )
    task_accel = split.s_v @ accel_v - jac_dot @ qdot
    return damped_pinv(jac, jac_damping) @ task_accel


def force_law(
    jac: np.ndarray,
    split: SubspaceSplit,
    gains: ForceGains,
    force_err: np.ndarray,
    lam_dot: np.ndarray,
    jac_damping: float = 1e-3,
) -> np.ndarray:
    """Direct force action on the force subspace as a joint acceleration.

    ``u_f = J+ (I - S_v S_v+) C S_f (K_Pf S_f+ e_F + K_Df lambda_dot)``.

    The projector ``(I - S_v S_v+)`` removes any component the compliance
    map would leak into the motion subspace, keeping the two parallel
    actions orthogonal by construction.
    """
    if split.n_f == 0:
        return np.zeros(jac.shape[1])
    inner = gains.k_p @ (split.s_f.T @ force_err) + gains.k_d @ np.asarray(lam_dot, dtype=float)
    task = gains.compliance @ (split.s_f @ inner)
    task = task - split.s_v @ (split.s_v.T @ task)
    return damped_pinv(jac, jac_damping) @ task


def parallel_step(
    arm: ArmModel,
    state: ControllerState,
    u_q: np.ndarray,
    u_f: np.ndarray,
    dt: float,
) -> ControllerState:
    """Advance the joint reference integrators by one control period.

    The total commanded acceleration is integrated semi-implicitly
    (velocity first, then position).  References are clamped to the joint
    limits and the reference velocity of any clamped joint is zeroed so
    the integrator cannot wind up against a stop.  In impedance-only mode
    the force action is gated off.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    u_tot = np.asarray(u_q, dtype=float)
    if state.mode is ControlMode.PARALLEL:
        u_tot = u_tot + np.asarray(u_f, dtype=float)
    state.qdot_ref = state.qdot_ref + u_tot * dt
    q_new = state.q_ref + state.qdot_ref * dt
    clamped_low = q_new < arm.joint_lower
    clamped_high = q_new > arm.joint_upper
    if np.any(clamped_low) or np.any(clamped_high):
        q_new = np.clip(q_new, arm.joint_lower, arm.joint_upper)
        state.qdot_ref[clamped_low | clamped_high] = 0.0
    state.q_ref = q_new
    return state
