"""Semi-autonomous measurement mission and operator command handling.

The mission cycles HOME -> APPROACH -> MEASURE -> RETRACT -> HOME.  The
operator (console or script) only nudges the base hold point, triggers
phase advances, adjusts the force target, aborts, or lands; everything
else -- contact detection, bias nulling, gel/vacuum sequencing, the
force ramp, reading capture and the safe withdrawal -- is automatic.

Phase contract:

* HOME      tool reference blends to and holds the folded home pose,
            impedance-only control, force reference zero.
* APPROACH  tool reference advances along the approach axis at constant
            speed; entering the phase re-zeroes the F/T bias while the
            tool is still unloaded.  The instant the push force crosses
            the contact threshold the approach axis is handed to the
            force loop (parallel mode, gentle hold force) and the pose
            reference freezes: a position-type axis must not stay closed
            around a stiff surface, so contact is held by force control
            from the first touch.  If the surface recedes and the push
            force collapses well below the threshold for a grace period,
            the axis is handed back to the creep (the force loop has no
            authority across a gap) and the next touch re-engages it.
            The operator advances to MEASURE with a trigger, which is
            rejected until the contact has been stable for the
            confirmation dwell.
* MEASURE   the force reference ramps from the hold level to the target
            (parallel mode throughout); the gel pump runs; once the
            force has settled inside the band and the echometer delivers
            a reading it is captured; after a minimum dwell the mission
            retracts.  Losing contact falls back to APPROACH (event
            logged) with the force loop still engaged so contact is
            re-acquired gently.
* RETRACT   force reference ramps back to zero (still in parallel mode);
            once unloaded the pose reference is re-anchored at the
            current reference pose and the tool withdraws impedance-only
            to the approach entry point, then the mission returns HOME.

Force references are produced exclusively by :class:`ForceRamp`, so the
commanded force is continuous (piecewise-linear) by construction.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .arm import ArmModel, forward_kinematics
from .interaction import ControlMode
from .spatial import Pose

__all__ = [
    "MissionPhase",
    "CommandKind",
    "OperatorCommand",
    "MissionParams",
    "ForceRamp",
    "MissionFeedback",
    "MissionOutput",
    "Mission",
    "LEGAL_TRANSITIONS",
    "load_script",
    "parse_command",
]


class MissionPhase(enum.Enum):
    HOME = "HOME"
    APPROACH = "APPROACH"
    MEASURE = "MEASURE"
    RETRACT = "RETRACT"


LEGAL_TRANSITIONS = frozenset(
    {
        (MissionPhase.HOME, MissionPhase.APPROACH),
        (MissionPhase.APPROACH, MissionPhase.MEASURE),
        (MissionPhase.APPROACH, MissionPhase.RETRACT),
        (MissionPhase.MEASURE, MissionPhase.RETRACT),
        (MissionPhase.MEASURE, MissionPhase.APPROACH),
        (MissionPhase.RETRACT, MissionPhase.HOME),
    }
)
"""Every phase change the mission may perform.  MEASURE -> APPROACH is
the contact-lost safety fallback; APPROACH -> RETRACT is the abort path."""


class CommandKind(enum.Enum):
    VELOCITY_SETPOINT = "velocity_setpoint"
    TRIGGER_NEXT_PHASE = "trigger_next_phase"
    ABORT = "abort"
    LAND = "land"
    SET_FORCE = "set_force"


@dataclass
class OperatorCommand:
    kind: CommandKind
    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))
    newtons: float = 0.0

    def __post_init__(self) -> None:
        self.linear = np.asarray(self.linear, dtype=float).reshape(3)
        self.angular = np.asarray(self.angular, dtype=float).reshape(3)


def parse_command(payload: dict) -> OperatorCommand:
    """Build an operator command from its wire/script dictionary form."""
    try:
        kind = CommandKind(payload["cmd"])
    except (KeyError, ValueError) as exc:
        raise ValueError(f"unknown command payload {payload!r}") from exc
    if kind is CommandKind.VELOCITY_SETPOINT:
        return OperatorCommand(
            kind,
            linear=np.asarray(payload.get("linear", [0.0, 0.0, 0.0]), dtype=float),
            angular=np.asarray(payload.get("angular", [0.0, 0.0, 0.0]), dtype=float),
        )
    if kind is CommandKind.SET_FORCE:
        if "newtons" not in payload:
            raise ValueError("set_force requires a 'newtons' field")
        return OperatorCommand(kind, newtons=float(payload["newtons"]))
    return OperatorCommand(kind)


def load_script(source) -> list[tuple[float, OperatorCommand]]:
    """Parse a line-delimited JSON command script.

    ``source`` may be a path or an iterable of lines.  Each line holds a
    JSON object with a non-negative timestamp ``t`` and a command payload;
    timestamps must be non-decreasing.
    """
    if isinstance(source, (str, bytes)):
        with open(source, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    else:
        lines = list(source)
    script: list[tuple[float, OperatorCommand]] = []
    last_t = 0.0
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"script line {lineno} is not valid JSON: {exc}") from exc
        if "t" not in payload:
            raise ValueError(f"script line {lineno} is missing a timestamp 't'")
        t = float(payload["t"])
        if t < 0.0 or t < last_t:
            raise ValueError(f"script line {lineno}: timestamps must be non-decreasing")
        last_t = t
        script.append((t, parse_command(payload)))
    return script


@dataclass
class ForceRamp:
    """Rate-limited force reference; the only producer of force targets."""

    rate: float = 1.75
    current: float = 0.0
    target: float = 0.0

    def __post_init__(self) -> None:
        if self.rate <= 0.0:
            raise ValueError("ramp rate must be positive")
        if self.current < 0.0 or self.target < 0.0:
            raise ValueError("force references must be non-negative")

    def retarget(self, target: float) -> None:
        if target < 0.0:
            raise ValueError("force target must be non-negative")
        self.target = target

    def step(self, dt: float) -> float:
        limit = self.rate * dt
        delta = self.target - self.current
        if delta > limit:
            delta = limit
        elif delta < -limit:
            delta = -limit
        self.current += delta
        return self.current


@dataclass
class MissionParams:
    # Parks the tool at base-CoM height with a near-horizontal wrist, so a
    # frontal contact force produces no pitch moment about the base and the
    # probe face meets the surface flush.
    home_q: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.7901, -2.7854, 1.7953, 0.0]))
    approach_axis: int = 0
    approach_sign: float = 1.0
    approach_speed: float = 0.02
    retract_speed: float = 0.05
    home_speed: float = 0.05
    contact_force_threshold: float = 0.5
    contact_dwell: float = 0.3
    force_rate: float = 1.75
    target_force: float = 3.5
    settle_band: float = 0.25
    settle_hold: float = 1.0
    min_measure_time: float = 8.0
    contact_loss_grace: float = 0.2
    max_linear_velocity: float = 0.5
    max_angular_velocity: float = 0.3
    max_force: float = 10.0
    home_tolerance: float = 0.01

    def __post_init__(self) -> None:
        self.home_q = np.asarray(self.home_q, dtype=float)
        if self.approach_axis not in (0, 1, 2):
            raise ValueError("approach axis must be 0, 1 or 2")
        if self.approach_sign not in (-1.0, 1.0):
            raise ValueError("approach sign must be +1 or -1")
        for name in (
            "approach_speed", "retract_speed", "home_speed", "contact_force_threshold",
            "contact_dwell", "force_rate", "target_force", "settle_band", "settle_hold",
            "min_measure_time", "max_linear_velocity", "max_angular_velocity", "max_force",
            "home_tolerance",
        ):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.target_force > self.max_force:
            raise ValueError("target force exceeds the safety maximum")

    @property
    def approach_direction(self) -> np.ndarray:
        d = np.zeros(3)
        d[self.approach_axis] = self.approach_sign
        return d


@dataclass
class MissionFeedback:
    """Per-tick sensor summary handed to the mission logic."""

    push_force: float
    """Measured contact force projected on the approach direction [N]."""
    in_contact: bool
    vacuum_on: bool
    echometer: float | None
    ee_ref_position: np.ndarray | None = None
    """Current reference end-effector position, used to re-anchor the
    pose reference bumplessly when a phase hands the approach axis back
    to position control."""


@dataclass
class MissionOutput:
    phase: MissionPhase
    mode: ControlMode
    pose_ref: Pose
    twist_ref: np.ndarray
    accel_ref: np.ndarray
    force_ref: np.ndarray
    """Desired measured force vector in the base frame."""
    force_ref_scalar: float
    pump_active: bool
    request_null_bias: bool
    request_reanchor: bool
    """True for exactly one tick when the controller should re-seat its
    joint reference on the measured joint state (issued at the moment
    the approach axis is handed from position to force control, so the
    stale position reference cannot keep driving into the surface)."""
    base_pos_ref: np.ndarray
    base_vel_ref: np.ndarray
    events: list[str]
    landed: bool


class Mission:
    """Stateful mission sequencer; one instance per flight."""

    def __init__(self, params: MissionParams, arm: ArmModel,
                 base_hold: np.ndarray | None = None) -> None:
        self.params = params
        self.arm = arm
        arm.check_limits(params.home_q)
        self.home_pose = forward_kinematics(arm, params.home_q)
        self.phase = MissionPhase.HOME
        self.phase_entry_t = 0.0
        self.ramp = ForceRamp(rate=params.force_rate)
        self.pose_ref = self.home_pose.copy()
        self.base_hold = np.zeros(3) if base_hold is None else np.asarray(base_hold, dtype=float)
        self.operator_linear = np.zeros(3)
        self.operator_angular = np.zeros(3)
        self.force_engaged = False
        self.pending_force_target = params.target_force
        self.contact_timer = 0.0
        self.settle_timer = 0.0
        self.loss_timer = 0.0
        self.release_timer = 0.0
        self.approach_entry: np.ndarray | None = None
        self.captured_this_cycle = False
        self.readings: list[tuple[float, float]] = []
        self.landing = False
        self.landed = False
        self._land_timer = 0.0
        self._vacuum_prev = False
        self._events: list[str] = []
        self._null_request = False
        self._reanchor_request = False
        self._home_announced = True

    # ------------------------------------------------------------------
    # operator commands

    def handle_command(self, command: OperatorCommand, t: float) -> tuple[bool, str | None]:
        """Apply an operator command; returns (accepted, rejection_reason)."""
        p = self.params
        if command.kind is CommandKind.VELOCITY_SETPOINT:
            lin = np.asarray(command.linear, dtype=float)
            ang = np.asarray(command.angular, dtype=float)
            lin_n = float(np.linalg.norm(lin))
            ang_n = float(np.linalg.norm(ang))
            if lin_n > p.max_linear_velocity:
                lin = lin * (p.max_linear_velocity / lin_n)
            if ang_n > p.max_angular_velocity:
                ang = ang * (p.max_angular_velocity / ang_n)
            self.operator_linear = lin
            self.operator_angular = ang
            return True, None
        if command.kind is CommandKind.SET_FORCE:
            if not np.isfinite(command.newtons) or command.newtons < 0.0:
                return False, "force target must be finite and non-negative"
            target = min(command.newtons, p.max_force)
            self.pending_force_target = target
            if self.phase is MissionPhase.MEASURE:
                self.ramp.retarget(target)
            return True, None
        if command.kind is CommandKind.TRIGGER_NEXT_PHASE:
            if self.landing:
                return False, "landing in progress"
            if self.phase is MissionPhase.HOME:
                self._begin_approach(t)
                return True, None
            if self.phase is MissionPhase.APPROACH:
                if not self.force_engaged:
                    return False, "not in contact"
                if self.contact_timer < p.contact_dwell:
                    return False, "contact not yet stable"
                self._begin_measure(t)
                return True, None
            if self.phase is MissionPhase.MEASURE:
                self._begin_retract(t, reason="operator_trigger")
                return True, None
            return False, "retract completes automatically"
        if command.kind is CommandKind.ABORT:
            if self.phase in (MissionPhase.APPROACH, MissionPhase.MEASURE):
                self._begin_retract(t, reason="abort")
                return True, None
            return False, f"nothing to abort in {self.phase.value}"
        if command.kind is CommandKind.LAND:
            if self.landing:
                return False, "already landing"
            self.landing = True
            if self.phase in (MissionPhase.APPROACH, MissionPhase.MEASURE):
                self._begin_retract(t, reason="land")
            self._events.append("landing")
            return True, None
        return False, f"unsupported command {command.kind.value}"

    # ------------------------------------------------------------------
    # phase transitions

    def _transition(self, new_phase: MissionPhase, t: float) -> None:
        assert (self.phase, new_phase) in LEGAL_TRANSITIONS, (
            f"illegal mission transition {self.phase.value} -> {new_phase.value}"
        )
        self.phase = new_phase
        self.phase_entry_t = t
        self._events.append(f"phase:{new_phase.value}")

    def _begin_approach(self, t: float) -> None:
        self._transition(MissionPhase.APPROACH, t)
        self.force_engaged = False
        self.captured_this_cycle = False
        self.contact_timer = 0.0
        self.release_timer = 0.0
        self.approach_entry = self.pose_ref.position.copy()
        # Re-zero the F/T sensor while the tool is guaranteed unloaded,
        # before any gel or pushing happens this cycle.
        self._null_request = True
        self._events.append("bias_nulled")

    def _hold_force(self) -> float:
        """Gentle contact-keeping force used between first touch and MEASURE."""
        return min(2.0 * self.params.contact_force_threshold, self.pending_force_target)

    def _engage_force(self, push_now: float) -> None:
        """Hand the approach axis to the force loop at first contact.

        Bumpless: the ramp starts from the force already present, and the
        controller is asked to re-anchor its joint reference on the
        measured state so the pose reference accumulated during the creep
        cannot keep commanding the tool into the surface.
        """
        self.force_engaged = True
        hold = self._hold_force()
        self.ramp.current = float(np.clip(push_now, 0.0, hold))
        self.ramp.retarget(hold)
        self.release_timer = 0.0
        self._reanchor_request = True
        self._events.append("contact_detected")

    def _release_force(self, fb: MissionFeedback) -> None:
        """Give the approach axis back to the position creep after a clean
        separation.

        Out of contact the force loop has almost no authority (its output
        scales with a capped force error), so chasing a receding surface
        with it stalls; the creep closes gaps at the full approach speed
        instead.  The pose reference restarts from wherever the joint
        reference actually is, so the handover is bumpless, and the next
        touch re-engages the force loop afresh.
        """
        self.force_engaged = False
        self.ramp.current = 0.0
        self.ramp.retarget(0.0)
        self.contact_timer = 0.0
        self.release_timer = 0.0
        if fb.ee_ref_position is not None:
            self.pose_ref.position = np.asarray(fb.ee_ref_position, dtype=float).copy()
        self._events.append("contact_released")

    def _begin_measure(self, t: float) -> None:
        self._transition(MissionPhase.MEASURE, t)
        self.settle_timer = 0.0
        self.loss_timer = 0.0
        # The ramp continues from the contact-hold level, so the commanded
        # force stays continuous across the phase change.
        self.ramp.retarget(self.pending_force_target)
        self._events.append("gel_pump_on")

    def _begin_retract(self, t: float, reason: str) -> None:
        self._transition(MissionPhase.RETRACT, t)
        self.ramp.retarget(0.0)
        self._events.append(f"retract:{reason}")

    def _begin_home(self, t: float) -> None:
        self._transition(MissionPhase.HOME, t)
        self._home_announced = False

    # ------------------------------------------------------------------
    # main tick

    def tick(self, t: float, dt: float, fb: MissionFeedback) -> MissionOutput:
        p = self.params
        direction = p.approach_direction
        twist = np.zeros(6)
        pump = False
        mode = ControlMode.IMPEDANCE_ONLY

        if fb.vacuum_on and not self._vacuum_prev:
            self._events.append("vacuum_established")
        if self._vacuum_prev and not fb.vacuum_on and self.phase is MissionPhase.MEASURE:
            self._events.append("vacuum_lost")
        self._vacuum_prev = fb.vacuum_on

        if self.phase is MissionPhase.HOME:
            self._blend_towards(self.home_pose.position, p.home_speed, dt, twist)
            if not self._home_announced and (
                float(np.linalg.norm(self.pose_ref.position - self.home_pose.position))
                <= p.home_tolerance
            ):
                self._home_announced = True
                self._events.append("home_reached")

        elif self.phase is MissionPhase.APPROACH:
            if not self.force_engaged:
                if fb.push_force > p.contact_force_threshold:
                    self._engage_force(fb.push_force)
                else:
                    step_v = direction * p.approach_speed
                    self.pose_ref.position = self.pose_ref.position + step_v * dt
                    twist[:3] = step_v
            if self.force_engaged:
                # Contact is held by the force loop at a gentle level while
                # the operator decides; the confirmation dwell only gates
                # the MEASURE trigger.
                mode = ControlMode.PARALLEL
                self.ramp.step(dt)
                if fb.push_force > p.contact_force_threshold:
                    self.contact_timer += dt
                    self.release_timer = 0.0
                else:
                    self.contact_timer = 0.0
                    # Well below the detection level (with hysteresis) the
                    # surface has genuinely moved away; after a short grace
                    # period hand the axis back to the creep.
                    if fb.push_force < 0.25 * p.contact_force_threshold:
                        self.release_timer += dt
                        if self.release_timer >= p.contact_loss_grace:
                            self._release_force(fb)
                    else:
                        self.release_timer = 0.0

        elif self.phase is MissionPhase.MEASURE:
            mode = ControlMode.PARALLEL
            pump = True
            self.ramp.step(dt)
            settled = (
                self.ramp.current == self.ramp.target
                and abs(fb.push_force - self.ramp.target) <= p.settle_band
            )
            self.settle_timer = self.settle_timer + dt if settled else 0.0
            if (
                not self.captured_this_cycle
                and self.settle_timer >= p.settle_hold
                and fb.echometer is not None
            ):
                self.captured_this_cycle = True
                self.readings.append((t, float(fb.echometer)))
                self._events.append("echo_reading")
            if fb.in_contact:
                self.loss_timer = 0.0
            else:
                self.loss_timer += dt
                if self.loss_timer >= p.contact_loss_grace:
                    # Fall back to APPROACH but keep the force loop engaged:
                    # it re-acquires the surface gently, whereas re-closing
                    # the position axis this near a stiff surface would slam.
                    self._events.append("contact_lost")
                    self.ramp.retarget(self._hold_force())
                    self.contact_timer = 0.0
                    self.release_timer = 0.0
                    self._transition(MissionPhase.APPROACH, t)
                    pump = False
            if (
                self.phase is MissionPhase.MEASURE
                and self.captured_this_cycle
                and (t - self.phase_entry_t) >= p.min_measure_time
            ):
                self._begin_retract(t, reason="complete")

        elif self.phase is MissionPhase.RETRACT:
            self.ramp.step(dt)
            if self.ramp.current > 0.0 or fb.push_force > p.contact_force_threshold:
                mode = ControlMode.PARALLEL
            else:
                if self.force_engaged:
                    # Hand the approach axis back to position control,
                    # re-anchored on the spot the reference actually holds
                    # so the withdrawal starts without a step.
                    self.force_engaged = False
                    if fb.ee_ref_position is not None:
                        self.pose_ref.position = np.asarray(
                            fb.ee_ref_position, dtype=float
                        ).copy()
                entry = self.approach_entry
                if entry is None:
                    self._begin_home(t)
                else:
                    step_v = -direction * p.retract_speed
                    self.pose_ref.position = self.pose_ref.position + step_v * dt
                    twist[:3] = step_v
                    if float(np.dot(self.pose_ref.position - entry, direction)) <= 0.0:
                        self.pose_ref.position = entry.copy()
                        self._begin_home(t)

        # Operator nudges move the base hold point; frozen during MEASURE
        # so nothing can drag the base while the tool is pressing.
        if self.phase is MissionPhase.MEASURE or self.landed:
            base_vel = np.zeros(3)
        else:
            base_vel = self.operator_linear
        self.base_hold = self.base_hold + base_vel * dt

        if self.landing and self.phase is MissionPhase.HOME and not self.landed:
            self.base_hold[2] -= 0.3 * dt
            self._land_timer += dt
            if self._land_timer >= 1.0:
                self.landed = True
                self._events.append("landed")

        force_scalar = self.ramp.current
        force_vec = -direction * force_scalar
        null_request, self._null_request = self._null_request, False
        reanchor, self._reanchor_request = self._reanchor_request, False
        events, self._events = self._events, []

        return MissionOutput(
            phase=self.phase,
            mode=mode,
            pose_ref=self.pose_ref.copy(),
            twist_ref=twist,
            accel_ref=np.zeros(6),
            force_ref=force_vec,
            force_ref_scalar=force_scalar,
            pump_active=pump,
            request_null_bias=null_request,
            request_reanchor=reanchor,
            base_pos_ref=self.base_hold.copy(),
            base_vel_ref=base_vel.copy(),
            events=events,
            landed=self.landed,
        )

    def _blend_towards(self, target: np.ndarray, speed: float, dt: float,
                       twist: np.ndarray) -> None:
        delta = target - self.pose_ref.position
        dist = float(np.linalg.norm(delta))
        if dist < 1e-12:
            return
        step = min(dist, speed * dt)
        vel = delta / dist * (step / dt)
        self.pose_ref.position = self.pose_ref.position + vel * dt
        twist[:3] = vel
