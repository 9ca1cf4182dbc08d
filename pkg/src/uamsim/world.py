"""Deterministic fixed-step simulation of the vehicle, arm and mock-up.

One :class:`World` instance owns all simulated state and advances it with
semi-implicit Euler at a fixed base rate (default 1 kHz).  Controllers
run slower and their outputs are held zero-order between ticks, exactly
like a discrete flight stack talking to a faster physics process.

Modelling choices, in one place:

* The base is a single rigid body carrying the total vehicle mass.  The
  arm and battery couple into it quasi-statically: their configuration
  shifts the gravity moment (measured against the trimmed home pose) and
  their relative accelerations react on the base as inertial forces.
* Joints track their references through independent second-order servos
  with velocity limits; rotor thrust follows commands through a
  first-order lag; the battery carriage through a slower first-order lag.
* The mock-up is a plane with a penalty contact: normal spring-damper
  force on the tool point, no friction, no contact moment.
* The F/T sensor samples the true reaction wrench in the tool frame at a
  fixed rate, adds bias plus Gaussian noise, and holds the last sample.
  Bias nulling subtracts the mean of a recent settling window.
* The echometer produces a thickness reading only while the vacuum seal
  is established and the tool is pressed at or above its force threshold.

Everything random flows from one seeded generator, so identical seed,
configuration and command sequence reproduce identical trajectories
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arm import ArmModel, BatteryCarriage, _chain, _rot_to_quat, arm_com, com_from_chain, forward_kinematics
from .flight import RotorCommand, VehicleModel, reconstruct_wrench
from .spatial import cross3, Pose, quat_conjugate, quat_from_axis_angle, quat_multiply, quat_rotate, quat_to_matrix

__all__ = [
    "SurfaceModel",
    "FTSensorModel",
    "EchometerModel",
    "PumpModel",
    "ContactState",
    "WorldCommands",
    "World",
    "SimulationDiverged",
]


class SimulationDiverged(RuntimeError):
    """Raised when any state variable stops being finite."""


@dataclass
class SurfaceModel:
    """Flat mock-up surface with a penalty-spring contact."""

    point: np.ndarray = field(default_factory=lambda: np.array([0.50, 0.0, 0.0]))
    normal: np.ndarray = field(default_factory=lambda: np.array([-1.0, 0.0, 0.0]))
    """Unit normal pointing from the surface back toward the vehicle."""
    stiffness: float = 1000.0
    damping: float = 10.0
    thickness: float = 0.019

    def __post_init__(self) -> None:
        self.point = np.asarray(self.point, dtype=float).reshape(3)
        self.normal = np.asarray(self.normal, dtype=float).reshape(3)
        n = np.linalg.norm(self.normal)
        if abs(n - 1.0) > 1e-9:
            raise ValueError("surface normal must be a unit vector")
        if self.stiffness <= 0.0 or self.damping < 0.0:
            raise ValueError("surface stiffness must be positive, damping non-negative")
        if self.thickness <= 0.0:
            raise ValueError("surface thickness must be positive")


@dataclass
class FTSensorModel:
    force_noise_std: float = 0.05
    moment_noise_std: float = 0.005
    rate_hz: float = 500.0
    bias: np.ndarray = field(
        default_factory=lambda: np.array([0.4, -0.2, 0.3, 0.01, -0.01, 0.02])
    )
    null_window_s: float = 0.5

    def __post_init__(self) -> None:
        self.bias = np.asarray(self.bias, dtype=float).reshape(6)
        if self.force_noise_std < 0.0 or self.moment_noise_std < 0.0:
            raise ValueError("sensor noise magnitudes must be non-negative")
        if self.rate_hz <= 0.0 or self.null_window_s <= 0.0:
            raise ValueError("sensor rate and settling window must be positive")


@dataclass
class EchometerModel:
    min_force: float = 3.0
    noise_std: float = 1e-4

    def __post_init__(self) -> None:
        if self.min_force <= 0.0 or self.noise_std < 0.0:
            raise ValueError("echometer threshold must be positive, noise non-negative")


@dataclass
class PumpModel:
    """Gel dispenser plus vacuum pump on the tool head."""

    dwell_force: float = 3.0
    dwell_time: float = 0.5

    def __post_init__(self) -> None:
        if self.dwell_force <= 0.0 or self.dwell_time <= 0.0:
            raise ValueError("pump dwell parameters must be positive")


@dataclass
class ContactState:
    in_contact: bool = False
    penetration: float = 0.0
    normal_force: float = 0.0
    gel_applied: bool = False
    vacuum_on: bool = False
    dwell_timer: float = 0.0


@dataclass
class WorldCommands:
    """Zero-order-held actuator commands between control ticks."""

    rotor: RotorCommand
    q_ref: np.ndarray
    battery_ref: float
    pump_active: bool = False


def _default_rotor_command(n_rotors: int, n_arms: int) -> RotorCommand:
    return RotorCommand(thrusts=np.zeros(n_rotors), tilts=np.zeros(n_arms))


class World:
    """All simulated state plus the fixed-step integrator."""

    def __init__(
        self,
        vehicle: VehicleModel,
        arm: ArmModel,
        carriage: BatteryCarriage,
        surface: SurfaceModel,
        ft_sensor: FTSensorModel,
        echometer: EchometerModel,
        pump: PumpModel,
        dt: float = 1e-3,
        gravity: float = 9.81,
        seed: int = 42,
        q0: np.ndarray | None = None,
        battery_x0: float = 0.0,
        trim_com: np.ndarray | None = None,
    ) -> None:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        self.vehicle = vehicle
        self.arm = arm
        self.carriage = carriage
        self.surface = surface
        self.ft_sensor = ft_sensor
        self.echometer = echometer
        self.pump = pump
        self.dt = dt
        self.gravity = gravity
        self.rng = np.random.default_rng(seed)

        self.t = 0.0
        self.pos = np.zeros(3)
        self.vel = np.zeros(3)
        self.quat = np.array([1.0, 0.0, 0.0, 0.0])
        self.omega = np.zeros(3)
        self.q = arm.clamp(np.zeros(arm.dof) if q0 is None else np.asarray(q0, dtype=float))
        self.qdot = np.zeros(arm.dof)
        self.battery_x = float(battery_x0)
        self._battery_z = -0.05
        self.thrust_state = np.zeros(vehicle.n_rotors)
        self.tilt_state = np.zeros(vehicle.n_arms)
        self.contact = ContactState()

        # Mass-moment trim: gravity moments are measured against this
        # first-mass-moment so a trimmed hover produces zero disturbance.
        if trim_com is None:
            trim_com = self._first_mass_moment()
        self._trim_moment = np.asarray(trim_com, dtype=float)

        self._sensor_every = max(1, round(1.0 / (ft_sensor.rate_hz * dt)))
        self._step_count = 0
        self.bias_nulled = False
        n_window = max(1, round(ft_sensor.null_window_s * ft_sensor.rate_hz))
        self._null_buffer = np.zeros((n_window, 6))
        self._null_count = 0
        self._null_idx = 0
        self._null_offset = np.zeros(6)
        self._latest_sample = np.zeros(6)

        ee0 = forward_kinematics(arm, self.q)
        self._ee_pos_base = ee0.position
        self._ee_rot_base = ee0.rotation()
        self._ee_pose_cache: Pose | None = ee0
        self._prev_ee_world: np.ndarray | None = None
        self._prev_com_rel: np.ndarray | None = None
        self._prev_com_rel_vel = np.zeros(3)
        self._prev_batt = self.battery_x
        self._prev_batt_vel = 0.0
        self._contact_force_world = np.zeros(3)
        self._sample_sensor()

    # ------------------------------------------------------------------
    # helpers

    def _first_mass_moment(self) -> np.ndarray:
        """m_arm * com_arm + m_batt * pos_batt in the body frame."""
        com = arm_com(self.arm, self.q)
        batt = np.array([self.battery_x, 0.0, self._battery_z])
        return self.arm.mass * com + self.carriage.mass * batt

    def base_pose(self) -> Pose:
        return Pose(self.pos.copy(), self.quat.copy())

    def ee_pose_base(self) -> Pose:
        if self._ee_pose_cache is None:
            self._ee_pose_cache = Pose(
                self._ee_pos_base.copy(), _rot_to_quat(self._ee_rot_base)
            )
        return self._ee_pose_cache

    def ee_rot_base(self) -> np.ndarray:
        """Tool orientation in the base frame as a rotation matrix."""
        return self._ee_rot_base

    def arm_com_base(self) -> np.ndarray:
        """Arm centre of mass in the base frame (from the last step)."""
        if self._prev_com_rel is not None:
            return self._prev_com_rel
        return arm_com(self.arm, self.q)

    def ee_pose_world(self) -> Pose:
        return self.base_pose().compose(self.ee_pose_base())

    # ------------------------------------------------------------------
    # sensors

    def _sample_sensor(self) -> None:
        rot_base = quat_to_matrix(self.quat)
        force_sensor = self._ee_rot_base.T @ (rot_base.T @ self._contact_force_world)
        truth = np.concatenate([force_sensor, np.zeros(3)])
        sample = truth + self.ft_sensor.bias
        if self.ft_sensor.force_noise_std > 0.0 or self.ft_sensor.moment_noise_std > 0.0:
            noise = self.rng.normal(size=6)
            noise[:3] *= self.ft_sensor.force_noise_std
            noise[3:] *= self.ft_sensor.moment_noise_std
            sample = sample + noise
        self._latest_sample = sample
        self._null_buffer[self._null_idx] = sample
        self._null_idx = (self._null_idx + 1) % self._null_buffer.shape[0]
        self._null_count = min(self._null_count + 1, self._null_buffer.shape[0])

    def ft_read(self) -> np.ndarray:
        """Latest F/T sample (tool frame), bias-nulling offset removed."""
        return self._latest_sample - self._null_offset

    def null_bias(self) -> None:
        """Re-zero the F/T output on the mean of the recent settling window.

        Whatever wrench is present when this is called -- including a real
        contact force -- becomes part of the offset, so subsequent
        contact-free reads would show its negative.  Callers must invoke
        this only while the tool is effectively unloaded.
        """
        if self._null_count == 0:
            return
        self._null_offset = self._null_buffer[: self._null_count].mean(axis=0)
        self.bias_nulled = True

    def echometer_read(self) -> float | None:
        """Thickness reading, or None while the measurement gate is closed."""
        if not self.contact.vacuum_on:
            return None
        if self.contact.normal_force < self.echometer.min_force:
            return None
        return self.surface.thickness + self.rng.normal(0.0, self.echometer.noise_std)

    # ------------------------------------------------------------------
    # pump / gel

    def _apply_gel_and_pump(self, active: bool, dt: float) -> None:
        if not self.contact.in_contact:
            # Separation breaks the seal and wipes the couplant film.
            self.contact.gel_applied = False
            self.contact.vacuum_on = False
            self.contact.dwell_timer = 0.0
            return
        if not active:
            self.contact.dwell_timer = 0.0
            return
        self.contact.gel_applied = True
        if self.contact.normal_force >= self.pump.dwell_force:
            self.contact.dwell_timer += dt
            if self.contact.dwell_timer >= self.pump.dwell_time:
                self.contact.vacuum_on = True
        else:
            self.contact.dwell_timer = 0.0
            if self.contact.normal_force <= 0.0:
                self.contact.vacuum_on = False

    # ------------------------------------------------------------------
    # dynamics

    def step(self, commands: WorldCommands, n_steps: int = 1) -> None:
        for _ in range(n_steps):
            self._step_once(commands)

    def _step_once(self, commands: WorldCommands) -> None:
        dt = self.dt
        arm = self.arm

        # Joint servos: independent second-order trackers with rate limits.
        wn = arm.servo_natural_freq
        qddot = wn * wn * (commands.q_ref - self.q) - 2.0 * arm.servo_damping * wn * self.qdot
        self.qdot = np.clip(self.qdot + qddot * dt, -arm.servo_rate_limit, arm.servo_rate_limit)
        q_new = self.q + self.qdot * dt
        hit = (q_new < arm.joint_lower) | (q_new > arm.joint_upper)
        if np.any(hit):
            q_new = np.clip(q_new, arm.joint_lower, arm.joint_upper)
            self.qdot[hit] = 0.0
        self.q = q_new

        # Battery carriage and rotor lags.
        self.battery_x += (commands.battery_ref - self.battery_x) * dt / self.carriage.time_constant
        self.thrust_state += (
            (commands.rotor.thrusts - self.thrust_state) * dt / self.vehicle.thrust_time_constant
        )
        self.tilt_state = np.asarray(commands.rotor.tilts, dtype=float)

        rotor_wrench = reconstruct_wrench(
            self.vehicle, RotorCommand(self.thrust_state, self.tilt_state)
        )

        # Tool point kinematics and the penalty contact (one chain pass
        # serves the tool pose, the arm CoM and the mass-moment trim).
        origins, _, rotations, tip = _chain(arm, self.q)
        self._ee_rot_base = rotations[-1]
        self._ee_pos_base = tip
        self._ee_pose_cache = None
        com_rel = com_from_chain(arm, origins, rotations)
        rot_base = quat_to_matrix(self.quat)
        ee_world = self.pos + rot_base @ tip
        if self._prev_ee_world is None:
            ee_vel_world = np.zeros(3)
        else:
            ee_vel_world = (ee_world - self._prev_ee_world) / dt
        self._prev_ee_world = ee_world

        normal = self.surface.normal
        depth = float(np.dot(self.surface.point - ee_world, normal))
        if depth > 0.0:
            rate = float(np.dot(-ee_vel_world, normal))
            f_n = self.surface.stiffness * depth + self.surface.damping * rate
            f_n = max(0.0, f_n)
        else:
            depth = 0.0
            f_n = 0.0
        self.contact.penetration = depth
        self.contact.normal_force = f_n
        self.contact.in_contact = f_n > 0.0
        self._contact_force_world = f_n * normal

        self._apply_gel_and_pump(commands.pump_active, dt)

        # Quasi-static arm/battery coupling into the base.
        if self._prev_com_rel is None:
            com_rel_vel = np.zeros(3)
            com_rel_acc = np.zeros(3)
        else:
            com_rel_vel = (com_rel - self._prev_com_rel) / dt
            com_rel_acc = (com_rel_vel - self._prev_com_rel_vel) / dt
        self._prev_com_rel = com_rel
        self._prev_com_rel_vel = com_rel_vel
        batt_vel = (self.battery_x - self._prev_batt) / dt
        batt_acc = (batt_vel - self._prev_batt_vel) / dt
        self._prev_batt = self.battery_x
        self._prev_batt_vel = batt_vel

        react_force_b = -arm.mass * com_rel_acc
        react_force_b = react_force_b - self.carriage.mass * batt_acc * np.array([1.0, 0.0, 0.0])
        batt_pos_b = np.array([self.battery_x, 0.0, self._battery_z])
        react_moment_b = cross3(com_rel, -arm.mass * com_rel_acc) + cross3(
            batt_pos_b, -self.carriage.mass * batt_acc * np.array([1.0, 0.0, 0.0])
        )

        gravity_b = rot_base.T @ np.array([0.0, 0.0, -self.gravity])
        mass_moment = arm.mass * com_rel + self.carriage.mass * batt_pos_b
        moment_shift = mass_moment - self._trim_moment
        gravity_moment_b = cross3(moment_shift, gravity_b)

        contact_force_b = rot_base.T @ self._contact_force_world
        contact_moment_b = cross3(tip, contact_force_b)

        force_w = (
            rot_base @ (rotor_wrench[:3] + react_force_b + contact_force_b)
            + np.array([0.0, 0.0, -self.vehicle.mass * self.gravity])
        )
        moment_b = (
            rotor_wrench[3:]
            + react_moment_b
            + gravity_moment_b
            + contact_moment_b
            - cross3(self.omega, self.vehicle.inertia * self.omega)
        )

        # Semi-implicit Euler on the floating base.
        self.vel = self.vel + (force_w / self.vehicle.mass) * dt
        self.pos = self.pos + self.vel * dt
        self.omega = self.omega + (moment_b / self.vehicle.inertia) * dt
        rate = float(np.linalg.norm(self.omega))
        if rate * dt > 1e-12:
            dq = quat_from_axis_angle(self.omega, rate * dt)
            self.quat = quat_multiply(self.quat, dq)
            self.quat = self.quat / np.linalg.norm(self.quat)

        self.t += dt
        self._step_count += 1
        if self._step_count % self._sensor_every == 0:
            self._sample_sensor()

        if self._step_count % 50 == 0:
            flat = np.concatenate(
                [self.pos, self.vel, self.quat, self.omega, self.q, self.qdot,
                 [self.battery_x], self.thrust_state]
            )
            if not np.all(np.isfinite(flat)):
                raise SimulationDiverged(
                    f"non-finite state at t={self.t:.3f}s; "
                    f"pos={self.pos}, vel={self.vel}, q={self.q}"
                )
