"""Experiment configuration: one validated tree, one YAML file.

Every tunable of the simulator, controllers and mission lives in
:class:`ExperimentConfig`.  A configuration can round-trip through YAML
with all defaults materialized, so an emitted file is a complete,
self-contained record of an experiment.  Validation happens eagerly on
construction -- gain blocks must be positive definite, limits positive,
and all derived rates must divide the base time step evenly -- and any
violation raises :class:`ConfigError` with a pointable diagnostic.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from .arm import ArmModel, BatteryCarriage, arm_com_x, battery_setpoint
from .flight import FlightGains, VehicleModel
from .interaction import ForceGains, ImpedanceGains, full_motion_split, make_subspace_split
from .mission import MissionParams
from .spatial import Pose
from .world import EchometerModel, FTSensorModel, PumpModel, SurfaceModel

__all__ = ["ConfigError", "InteractionConfig", "ExperimentConfig",
           "load_config", "dump_config", "default_config"]


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class InteractionConfig:
    """Diagonal task-space gain pairs (linear, angular) for the arm loops."""

    inertia_linear: float = 0.5
    inertia_angular: float = 0.001
    stiffness_linear: float = 30.0
    stiffness_angular: float = 0.1
    damping_linear: float = 7.0
    damping_angular: float = 0.2
    force_p_linear: float = 0.25
    force_p_angular: float = 0.5
    force_d_linear: float = 0.1
    force_d_angular: float = 0.1
    axis_compliance: float = 1e-3
    jacobian_damping: float = 1e-3
    lambda_cutoff_hz: float = 20.0
    wrench_cutoff_hz: float = 2.0

    def impedance_gains(self, split) -> ImpedanceGains:
        return ImpedanceGains.from_axis_gains(
            split,
            inertia=(self.inertia_linear, self.inertia_angular),
            stiffness=(self.stiffness_linear, self.stiffness_angular),
            damping=(self.damping_linear, self.damping_angular),
        )

    def force_gains(self, split) -> ForceGains:
        return ForceGains.from_axis_gains(
            split,
            k_p=(self.force_p_linear, self.force_p_angular),
            k_d=(self.force_d_linear, self.force_d_angular),
            axis_compliance=self.axis_compliance,
        )


@dataclass
class ExperimentConfig:
    seed: int = 42
    duration: float = 20.0
    dt: float = 1e-3
    control_rate_hz: float = 250.0
    telemetry_rate_hz: float = 100.0
    gravity: float = 9.81
    vehicle: VehicleModel = field(default_factory=VehicleModel)
    flight_gains: FlightGains = field(default_factory=FlightGains)
    arm: ArmModel = field(default_factory=ArmModel)
    carriage: BatteryCarriage = field(default_factory=BatteryCarriage)
    surface: SurfaceModel = field(default_factory=SurfaceModel)
    ft_sensor: FTSensorModel = field(default_factory=FTSensorModel)
    echometer: EchometerModel = field(default_factory=EchometerModel)
    pump: PumpModel = field(default_factory=PumpModel)
    mission: MissionParams = field(default_factory=MissionParams)
    interaction: InteractionConfig = field(default_factory=InteractionConfig)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        try:
            self._validate()
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def _validate(self) -> None:
        if self.dt <= 0.0:
            raise ConfigError("dt must be positive")
        if self.duration <= 0.0:
            raise ConfigError("duration must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        for name, rate in (
            ("control_rate_hz", self.control_rate_hz),
            ("telemetry_rate_hz", self.telemetry_rate_hz),
            ("ft_sensor.rate_hz", self.ft_sensor.rate_hz),
        ):
            if rate <= 0.0:
                raise ConfigError(f"{name} must be positive")
            period_steps = 1.0 / (rate * self.dt)
            if abs(period_steps - round(period_steps)) > 1e-9 or round(period_steps) < 1:
                raise ConfigError(
                    f"{name}={rate} does not divide the base step dt={self.dt} evenly"
                )
        self.arm.check_limits(self.mission.home_q)
        if self.mission.home_q.size != self.arm.dof:
            raise ConfigError("mission home configuration size must match the arm")
        # Building the gain blocks runs the positive-definiteness checks.
        split = make_subspace_split(self.mission.approach_axis)
        self.interaction.impedance_gains(split)
        self.interaction.impedance_gains(full_motion_split())
        self.interaction.force_gains(split)
        if self.interaction.jacobian_damping < 0.0:
            raise ConfigError("jacobian damping must be non-negative")
        if self.interaction.lambda_cutoff_hz <= 0.0:
            raise ConfigError("force-rate filter cutoff must be positive")
        if self.interaction.wrench_cutoff_hz <= 0.0:
            raise ConfigError("wrench filter cutoff must be positive")
        if self.mission.target_force > 0.9 * self.vehicle.n_rotors * self.vehicle.rotor_max_thrust:
            raise ConfigError("force target is beyond any plausible authority")
        axis = self.mission.approach_axis
        direction = self.mission.approach_direction
        if float(np.dot(self.surface.normal, direction)) >= 0.0:
            raise ConfigError(
                "surface normal must oppose the approach direction "
                f"(normal={self.surface.normal.tolist()}, approach axis {axis})"
            )

    def resolve_carriage_offset(self) -> None:
        """Center the carriage on the home posture: the commanded battery
        position is zero when the arm CoM sits at its home value."""
        com_home = arm_com_x(self.arm, self.mission.home_q)
        self.carriage.offset = -self.carriage.gain * com_home

    def home_battery_x(self) -> float:
        value, _ = battery_setpoint(
            self.carriage, arm_com_x(self.arm, self.mission.home_q)
        )
        return value

    # ------------------------------------------------------------------
    # serialization

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "duration": self.duration,
            "dt": self.dt,
            "control_rate_hz": self.control_rate_hz,
            "telemetry_rate_hz": self.telemetry_rate_hz,
            "gravity": self.gravity,
            "vehicle": _plain(dataclasses.asdict(self.vehicle)),
            "flight_gains": _plain(dataclasses.asdict(self.flight_gains)),
            "arm": {
                "joint_axes": self.arm.joint_axes.tolist(),
                "link_offsets": self.arm.link_offsets.tolist(),
                "tool_offset": self.arm.tool_offset,
                "link_masses": self.arm.link_masses.tolist(),
                "com_offsets": self.arm.com_offsets.tolist(),
                "joint_lower": self.arm.joint_lower.tolist(),
                "joint_upper": self.arm.joint_upper.tolist(),
                "mount": {
                    "position": self.arm.mount.position.tolist(),
                    "orientation": self.arm.mount.orientation.tolist(),
                },
                "servo_natural_freq": self.arm.servo_natural_freq,
                "servo_damping": self.arm.servo_damping,
                "servo_rate_limit": self.arm.servo_rate_limit,
            },
            "carriage": _plain(dataclasses.asdict(self.carriage)),
            "surface": _plain(dataclasses.asdict(self.surface)),
            "ft_sensor": _plain(dataclasses.asdict(self.ft_sensor)),
            "echometer": _plain(dataclasses.asdict(self.echometer)),
            "pump": _plain(dataclasses.asdict(self.pump)),
            "mission": _plain(dataclasses.asdict(self.mission)),
            "interaction": _plain(dataclasses.asdict(self.interaction)),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data or {})
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")

        def build(klass, key, **extra):
            section = dict(data.get(key) or {})
            section.update(extra)
            names = {f.name for f in dataclasses.fields(klass)}
            bad = set(section) - names
            if bad:
                raise ConfigError(f"unknown keys in '{key}': {sorted(bad)}")
            try:
                return klass(**section)
            except ValueError as exc:
                raise ConfigError(f"invalid '{key}' section: {exc}") from exc

        arm_section = dict(data.get("arm") or {})
        mount = arm_section.pop("mount", None)
        if mount is not None:
            arm_section["mount"] = Pose(
                np.asarray(mount.get("position", [0.0, 0.0, 0.0]), dtype=float),
                np.asarray(mount.get("orientation", [1.0, 0.0, 0.0, 0.0]), dtype=float),
            )
        try:
            arm = ArmModel(**arm_section)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid 'arm' section: {exc}") from exc

        carriage_section = dict(data.get("carriage") or {})
        auto_offset = carriage_section.pop("offset", "auto")

        try:
            cfg = cls(
                seed=int(data.get("seed", 42)),
                duration=float(data.get("duration", 20.0)),
                dt=float(data.get("dt", 1e-3)),
                control_rate_hz=float(data.get("control_rate_hz", 250.0)),
                telemetry_rate_hz=float(data.get("telemetry_rate_hz", 100.0)),
                gravity=float(data.get("gravity", 9.81)),
                vehicle=build(VehicleModel, "vehicle"),
                flight_gains=build(FlightGains, "flight_gains"),
                arm=arm,
                carriage=BatteryCarriage(offset=0.0, **carriage_section),
                surface=build(SurfaceModel, "surface"),
                ft_sensor=build(FTSensorModel, "ft_sensor"),
                echometer=build(EchometerModel, "echometer"),
                pump=build(PumpModel, "pump"),
                mission=build(MissionParams, "mission"),
                interaction=build(InteractionConfig, "interaction"),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        if auto_offset == "auto":
            cfg.resolve_carriage_offset()
        else:
            cfg.carriage.offset = float(auto_offset)
        return cfg

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _plain(obj: Any) -> Any:
    """Recursively convert numpy values to plain Python for YAML/JSON."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def default_config() -> ExperimentConfig:
    return ExperimentConfig.from_dict({})


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"configuration file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"configuration file is not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    return ExperimentConfig.from_dict(data)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)
