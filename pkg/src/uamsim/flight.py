"""Base flight controller and rotor allocation for the tilting octarotor.

The vehicle carries four arms at 90-degree spacing, each with a coaxial
rotor pair that a single servo tilts about the arm axis.  Lateral force
is produced by tilting, not by pitching the hull, so position control
and attitude control stay decoupled:

* position P -> velocity PID (+ gravity feed-forward) -> desired force,
* attitude P -> body-rate PID -> desired moment,

and the stacked 6-D wrench is mapped to rotors by a linear allocation in
the per-arm (vertical, lateral) thrust components.  Per-arm thrust
magnitude and tilt angle are recovered afterwards, which keeps the
allocation itself exactly linear and invertible on the feasible set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spatial import cross3, quat_conjugate, quat_multiply, quat_rotate, quat_to_rotvec

__all__ = [
    "VehicleModel",
    "FlightGains",
    "FlightState",
    "RotorCommand",
    "cascade_wrench",
    "allocate",
    "reconstruct_wrench",
]

GRAVITY = 9.81


@dataclass
class VehicleModel:
    """Rigid-body and rotor-layout parameters of the flying base."""

    mass: float = 6.0
    inertia: np.ndarray = field(default_factory=lambda: np.array([0.15, 0.15, 0.25]))
    arm_radius: float = 0.35
    arm_angles: np.ndarray = field(
        default_factory=lambda: np.deg2rad([45.0, 135.0, 225.0, 315.0])
    )
    rotor_max_thrust: float = 25.0
    tilt_limit: float = np.pi / 2
    yaw_drag: float = 0.016
    """Reactive yaw torque per unit thrust [N*m/N]; signs alternate within
    each coaxial pair, so equal pair split cancels the net drag torque."""
    thrust_time_constant: float = 0.03

    def __post_init__(self) -> None:
        self.inertia = np.asarray(self.inertia, dtype=float).reshape(3)
        self.arm_angles = np.asarray(self.arm_angles, dtype=float).reshape(-1)
        if self.mass <= 0.0 or np.any(self.inertia <= 0.0):
            raise ValueError("vehicle mass and inertia must be positive")
        if self.arm_radius <= 0.0:
            raise ValueError("arm radius must be positive")
        if self.rotor_max_thrust <= 0.0:
            raise ValueError("rotor thrust limit must be positive")
        if not 0.0 < self.tilt_limit <= np.pi / 2:
            raise ValueError("tilt limit must lie in (0, pi/2]")
        if self.thrust_time_constant <= 0.0:
            raise ValueError("thrust time constant must be positive")
        self._lateral_cache: np.ndarray | None = None
        self._alloc_pinv_cache: np.ndarray | None = None

    @property
    def n_arms(self) -> int:
        return self.arm_angles.size

    @property
    def n_rotors(self) -> int:
        return 2 * self.n_arms

    def lateral_axes(self) -> np.ndarray:
        """Per-arm tilt directions ``e_i = d_i x z_hat`` as rows (cached).

        The layout is fixed at construction; models are treated as
        immutable afterwards.
        """
        if self._lateral_cache is None:
            self._lateral_cache = np.stack(
                [np.array([np.sin(a), -np.cos(a), 0.0]) for a in self.arm_angles]
            )
        return self._lateral_cache

    def allocation_pinv(self) -> np.ndarray:
        """Exact pseudo-inverse of the allocation matrix (cached).

        For a planar rotor layout the allocation decouples: vertical
        components drive only (Fz, Mx, My) and lateral components only
        (Fx, Fy, Mz).  Inverting the two blocks separately keeps the
        cross terms identically zero, so a pure vertical wrench yields
        bitwise-zero lateral components (a dense SVD pseudo-inverse
        would leak O(eps) into them).
        """
        if self._alloc_pinv_cache is None:
            n = self.n_arms
            mat = self.allocation_matrix()
            vert_rows = [2, 3, 4]
            lat_rows = [0, 1, 5]
            pinv = np.zeros((2 * n, 6))
            pinv[np.ix_(range(n), vert_rows)] = np.linalg.pinv(mat[np.ix_(vert_rows, range(n))])
            pinv[np.ix_(range(n, 2 * n), lat_rows)] = np.linalg.pinv(
                mat[np.ix_(lat_rows, range(n, 2 * n))]
            )
            self._alloc_pinv_cache = pinv
        return self._alloc_pinv_cache

    def allocation_matrix(self) -> np.ndarray:
        """6 x 2*n_arms map from (vertical, lateral) per-arm thrust
        components to the body wrench."""
        n = self.n_arms
        mat = np.zeros((6, 2 * n))
        for i, ang in enumerate(self.arm_angles):
            d = np.array([np.cos(ang), np.sin(ang), 0.0])
            e = np.array([d[1], -d[0], 0.0])  # d x z_hat, the tilt direction
            mat[2, i] = 1.0  # vertical component -> Fz
            mat[3:5, i] = self.arm_radius * e[:2]  # and roll/pitch moment
            mat[0:2, n + i] = e[:2]  # lateral component -> Fx, Fy
            mat[5, n + i] = -self.arm_radius  # and yaw moment
        return mat


@dataclass
class FlightGains:
    """Cascade gains; integral states are clamped to the windup limits."""

    pos_p: float = 4.0
    vel_p: float = 10.0
    vel_i: float = 12.0
    vel_d: float = 0.5
    vel_i_limit: float = 2.0
    att_p: float = 4.0
    rate_p: float = 8.0
    rate_i: float = 0.5
    rate_d: float = 0.05
    rate_i_limit: float = 10.0

    def __post_init__(self) -> None:
        for name in ("pos_p", "vel_p", "att_p", "rate_p"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("vel_i", "vel_d", "rate_i", "rate_d"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.vel_i_limit <= 0.0 or self.rate_i_limit <= 0.0:
            raise ValueError("anti-windup limits must be positive")


@dataclass
class FlightState:
    """Integrator/derivative memory of the cascade controller."""

    vel_integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    prev_vel_err: np.ndarray | None = None
    rate_integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    prev_rate_err: np.ndarray | None = None


@dataclass
class RotorCommand:
    """Per-rotor thrusts [N] and per-arm tilt angles [rad]."""

    thrusts: np.ndarray
    tilts: np.ndarray
    saturated: bool = False


def cascade_wrench(
    model: VehicleModel,
    gains: FlightGains,
    state: FlightState,
    pos_ref: np.ndarray,
    vel_ref: np.ndarray,
    att_ref: np.ndarray,
    pos: np.ndarray,
    vel: np.ndarray,
    quat: np.ndarray,
    omega: np.ndarray,
    dt: float,
    wrench_ff_body: np.ndarray | None = None,
) -> np.ndarray:
    """One tick of the position/attitude cascade.

    Inputs are world-frame position/velocity, a world-frame reference
    attitude quaternion, and body-frame rates.  The returned 6-vector is
    the desired wrench in the body frame (force over moment), including
    gravity compensation.

    ``wrench_ff_body`` is an optional body-frame feed-forward added on
    top of the cascade output.  Its intended use is cancelling known
    external loads (the manipulator's contact reaction) directly at the
    wrench level: leaving a held contact force to the position
    integrator instead makes the base recede and spring back on the
    integrator's timescale, which the arm's force controller then
    chases.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    vel_sp = np.asarray(vel_ref, dtype=float) + gains.pos_p * (
        np.asarray(pos_ref, dtype=float) - np.asarray(pos, dtype=float)
    )
    vel_err = vel_sp - np.asarray(vel, dtype=float)
    state.vel_integral = np.clip(
        state.vel_integral + vel_err * dt, -gains.vel_i_limit, gains.vel_i_limit
    )
    vel_err_rate = (
        np.zeros(3) if state.prev_vel_err is None else (vel_err - state.prev_vel_err) / dt
    )
    state.prev_vel_err = vel_err
    accel_sp = (
        gains.vel_p * vel_err + gains.vel_i * state.vel_integral + gains.vel_d * vel_err_rate
    )
    force_world = model.mass * (accel_sp + np.array([0.0, 0.0, GRAVITY]))

    att_err_world = quat_to_rotvec(quat_multiply(att_ref, quat_conjugate(quat)))
    att_err_body = quat_rotate(quat_conjugate(quat), att_err_world)
    rate_err = gains.att_p * att_err_body - np.asarray(omega, dtype=float)
    state.rate_integral = np.clip(
        state.rate_integral + rate_err * dt, -gains.rate_i_limit, gains.rate_i_limit
    )
    rate_err_rate = (
        np.zeros(3) if state.prev_rate_err is None else (rate_err - state.prev_rate_err) / dt
    )
    state.prev_rate_err = rate_err
    moment = (
        gains.rate_p * rate_err + gains.rate_i * state.rate_integral + gains.rate_d * rate_err_rate
    )

    force_body = quat_rotate(quat_conjugate(quat), force_world)
    wrench = np.concatenate([force_body, moment])
    if wrench_ff_body is not None:
        wrench = wrench + np.asarray(wrench_ff_body, dtype=float).reshape(6)
    return wrench


def allocate(model: VehicleModel, wrench: np.ndarray) -> RotorCommand:
    """Map a desired body wrench to rotor thrusts and arm tilt angles.

    The wrench is first solved in the linear (vertical, lateral) per-arm
    components through the exact pseudo-inverse of the allocation matrix,
    then converted to thrust magnitude and tilt per arm.  If any pair
    exceeds its thrust limit the whole component vector is scaled down
    proportionally (preserving the wrench direction) and the command is
    flagged saturated, as is any tilt clamped at its limit.
    """
    wrench = np.asarray(wrench, dtype=float).reshape(6)
    components = model.allocation_pinv() @ wrench
    n = model.n_arms
    vertical = components[:n]
    lateral = components[n:]
    pair_thrust = np.hypot(vertical, lateral)
    pair_limit = 2.0 * model.rotor_max_thrust
    saturated = False
    peak = pair_thrust.max(initial=0.0)
    if peak > pair_limit:
        scale = pair_limit / peak
        vertical = vertical * scale
        lateral = lateral * scale
        pair_thrust = pair_thrust * scale
        saturated = True
    tilts = np.arctan2(lateral, vertical)
    clipped = np.clip(tilts, -model.tilt_limit, model.tilt_limit)
    if np.any(np.abs(tilts - clipped) > 1e-12):
        saturated = True
    thrusts = np.repeat(pair_thrust / 2.0, 2)
    return RotorCommand(thrusts=thrusts, tilts=clipped, saturated=saturated)


def reconstruct_wrench(model: VehicleModel, command: RotorCommand) -> np.ndarray:
    """Body wrench produced by a rotor command; allocation test oracle.

    Sums per-rotor thrust vectors, their moments about the body origin
    and the alternating reactive yaw-drag torques.  With the radial arm
    direction ``d``, its lateral ``e = d x z`` and tilt ``tau``, the
    thrust direction is ``cos(tau) z + sin(tau) e`` and its moment arm
    cross product reduces to ``d x dir = cos(tau) e - sin(tau) z``.
    """
    thrusts = np.asarray(command.thrusts, dtype=float).reshape(model.n_rotors)
    tilts = np.asarray(command.tilts, dtype=float).reshape(model.n_arms)
    lateral = model.lateral_axes()
    cos_t = np.cos(tilts)
    sin_t = np.sin(tilts)
    z_hat = np.array([0.0, 0.0, 1.0])
    dirs = cos_t[:, None] * z_hat + sin_t[:, None] * lateral
    pair = thrusts[0::2] + thrusts[1::2]
    diff = thrusts[0::2] - thrusts[1::2]
    force = pair @ dirs
    arm_cross = cos_t[:, None] * lateral - sin_t[:, None] * z_hat
    moment = model.arm_radius * (pair @ arm_cross) + model.yaw_drag * (diff @ dirs)
    return np.concatenate([force, moment])
