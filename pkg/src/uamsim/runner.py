"""Closed-loop experiment runner.

Wires the mission sequencer, the arm interaction controller, the flight
cascade and the physics world into one fixed-step loop:

* physics advances every ``dt`` (1 kHz by default);
* the controllers run on a decimated grid (250 Hz by default) and their
  outputs are zero-order-held between ticks;
* telemetry records sample the world on their own grid (100 Hz by
  default); mission events raised between records are attached to the
  next record so none are lost.

Force feedback is wired with one deliberate asymmetry.  The wrist sensor
reports the reaction wrench (what the environment applies to the tool).
The direct force loop consumes that reading as-is: pushing less than
desired yields an error that drives the tool toward the surface.  The
impedance law instead expects the wrench acting on its virtual mass, so
it receives the *negated* reading; feeding it the raw reaction would
turn contact into positive feedback and run away.

The interaction laws run in admittance form: pose error, Jacobians and
the integrators all live on the *reference* joint state, which the
position servos then track.  Closing them around the measured joint
state is not viable here -- the virtual damping-to-inertia ratio of the
angular axes (200 1/s) sits far beyond the 20 rad/s servo bandwidth, so
plant-side feedback turns the lag into a limit cycle.  Wrench feedback
into both laws is gated off until the first bias-nulling completes;
before that the sensor offset would masquerade as a real load.  Both
laws (and the mission's contact logic) consume a low-passed copy of the
gated wrench -- the laws divide by virtual inertias as small as 1e-3,
which would amplify raw sensor noise into newtons of contact-force
jitter.  Telemetry always records the unfiltered reading.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .arm import battery_setpoint, forward_kinematics, jacobian_and_dot
from .config import ExperimentConfig
from .flight import FlightState, allocate, cascade_wrench
from .interaction import (
    ControllerState,
    ControlMode,
    damped_pinv,
    filter_wrench,
    force_error,
    force_law,
    full_motion_split,
    impedance_law,
    lambda_dot,
    make_subspace_split,
    parallel_step,
    pose_error,
)
from .mission import Mission, MissionFeedback, OperatorCommand
from .spatial import cross3, quat_conjugate, quat_rotate
from .telemetry import TelemetryWriter
from .world import SimulationDiverged, World, WorldCommands

__all__ = ["RunResult", "build_world", "run_scenario"]

# A pull-style source of external operator commands: returns an iterable
# of (command, ack) pairs, where ack(accepted, reason, phase) may be None.
CommandSource = Callable[[], Iterable[tuple[OperatorCommand, Optional[Callable]]]]


@dataclass
class RunResult:
    sim_time: float = 0.0
    wall_time: float = 0.0
    steps: int = 0
    control_ticks: int = 0
    records: int = 0
    telemetry_path: Optional[str] = None
    readings: list[tuple[float, float]] = field(default_factory=list)
    events: list[tuple[float, str]] = field(default_factory=list)
    command_log: list[dict] = field(default_factory=list)
    phase_durations: dict[str, float] = field(default_factory=dict)
    final_phase: str = ""
    landed: bool = False
    diverged: bool = False
    detail: str = ""


def build_world(config: ExperimentConfig) -> World:
    """Construct the plant in its scenario start state: hovering at the
    origin with the arm parked in the home posture and rotors pre-spun
    to the hover thrust (takeoff is assumed already complete)."""
    world = World(
        vehicle=config.vehicle,
        arm=config.arm,
        carriage=config.carriage,
        surface=config.surface,
        ft_sensor=config.ft_sensor,
        echometer=config.echometer,
        pump=config.pump,
        dt=config.dt,
        gravity=config.gravity,
        seed=config.seed,
        q0=config.mission.home_q,
        battery_x0=config.home_battery_x(),
    )
    hover = config.vehicle.mass * config.gravity / config.vehicle.n_rotors
    world.thrust_state[:] = hover
    return world


def run_scenario(
    config: ExperimentConfig,
    script: Optional[list[tuple[float, OperatorCommand]]] = None,
    telemetry_path: Optional[str] = None,
    scenario_name: str = "",
    live: bool = False,
    command_source: Optional[CommandSource] = None,
    telemetry_sink: Optional[Callable[[dict], None]] = None,
) -> RunResult:
    """Run one scripted (and/or interactively commanded) experiment."""
    world = build_world(config)
    mission = Mission(config.mission, config.arm, base_hold=world.pos)

    dt = config.dt
    k_ctrl = round(1.0 / (config.control_rate_hz * dt))
    k_tel = round(1.0 / (config.telemetry_rate_hz * dt))
    dt_ctrl = k_ctrl * dt
    n_steps = round(config.duration / dt)

    split_par = make_subspace_split(config.mission.approach_axis)
    split_imp = full_motion_split()
    gains_imp_par = config.interaction.impedance_gains(split_par)
    gains_imp_full = config.interaction.impedance_gains(split_imp)
    gains_force = config.interaction.force_gains(split_par)
    jac_damping = config.interaction.jacobian_damping
    approach_dir = config.mission.approach_direction

    ctrl = ControllerState(q_ref=config.mission.home_q, qdot_ref=np.zeros(config.arm.dof))
    flight_state = FlightState()
    att_ref = np.array([1.0, 0.0, 0.0, 0.0])

    script = sorted(script or [], key=lambda item: item[0])
    script_idx = 0

    writer = None
    tel_file = None
    if telemetry_path is not None:
        tel_file = open(telemetry_path, "w", encoding="utf-8")
        writer = TelemetryWriter(
            tel_file,
            seed=config.seed,
            config_hash=config.config_hash(),
            scenario=scenario_name,
        )

    result = RunResult(telemetry_path=telemetry_path)
    commands = WorldCommands(
        rotor=allocate(config.vehicle, np.array([0.0, 0.0, config.vehicle.mass * config.gravity, 0.0, 0.0, 0.0])),
        q_ref=ctrl.q_ref.copy(),
        battery_ref=world.battery_x,
        pump_active=False,
    )

    pending_events: list[str] = []
    pending_echo: Optional[float] = None
    n_readings_seen = 0
    out = None
    wrench_base = np.zeros(6)
    push = 0.0
    battery_ref = world.battery_x
    rotor = commands.rotor
    dq_sway = np.zeros(config.arm.dof)
    servo_lag = 2.0 * config.arm.servo_damping / config.arm.servo_natural_freq
    wall_start = time.monotonic()

    try:
        for step_i in range(n_steps):
            t = world.t

            if step_i % k_ctrl == 0:
                # -- sensing ------------------------------------------------
                wrench_tool = world.ft_read()
                rot_tool = world.ee_rot_base()
                wrench_base = np.concatenate(
                    [rot_tool @ wrench_tool[:3], rot_tool @ wrench_tool[3:]]
                )
                push = float(wrench_base[:3] @ (-approach_dir))
                wrench_fb = wrench_base if world.bias_nulled else np.zeros(6)
                # The probe touches through a point contact, which cannot
                # transmit moments; measured moments are sensor noise plus
                # microscopic lever terms, and the small angular virtual
                # inertia would amplify them a thousandfold into rotation
                # demands that couple back into the force axis.  The laws
                # therefore see forces only.
                wrench_fb = np.concatenate([wrench_fb[:3], np.zeros(3)])
                wrench_ctrl = filter_wrench(
                    ctrl, wrench_fb, dt_ctrl, config.interaction.wrench_cutoff_hz
                )
                push_ctrl = float(wrench_ctrl[:3] @ (-approach_dir))
                echo = world.echometer_read()
                ee_ref = forward_kinematics(config.arm, ctrl.q_ref)
                fb = MissionFeedback(
                    push_force=push_ctrl,
                    in_contact=world.contact.in_contact,
                    vacuum_on=world.contact.vacuum_on,
                    echometer=echo,
                    ee_ref_position=ee_ref.position,
                )

                # -- operator commands ---------------------------------------
                while script_idx < len(script) and script[script_idx][0] <= t + 1e-12:
                    _, cmd = script[script_idx]
                    script_idx += 1
                    accepted, reason = mission.handle_command(cmd, t)
                    result.command_log.append(
                        {"t": t, "cmd": cmd.kind.value, "accepted": accepted, "reason": reason}
                    )
                if command_source is not None:
                    for cmd, ack in command_source():
                        accepted, reason = mission.handle_command(cmd, t)
                        result.command_log.append(
                            {"t": t, "cmd": cmd.kind.value, "accepted": accepted, "reason": reason}
                        )
                        if ack is not None:
                            ack(accepted, reason, mission.phase.value)

                # -- mission sequencing --------------------------------------
                out = mission.tick(t, dt_ctrl, fb)
                if out.request_null_bias:
                    world.null_bias()
                if out.request_reanchor:
                    # First touch: seat the joint reference on the measured
                    # joints and drop its velocity, so nothing keeps pushing
                    # the pose reference accumulated during the creep into
                    # the surface while the force loop takes over the axis.
                    # The measured joints track the sway-offset command, so
                    # the offset is removed to keep the reference sway-free.
                    ctrl.q_ref = world.q - dq_sway
                    ctrl.qdot_ref = np.zeros(config.arm.dof)
                for name in out.events:
                    result.events.append((t, name))
                    pending_events.append(name)
                if len(mission.readings) > n_readings_seen:
                    pending_echo = mission.readings[-1][1]
                    n_readings_seen = len(mission.readings)

                # -- arm interaction control (admittance form) ---------------
                split = split_par if out.mode is ControlMode.PARALLEL else split_imp
                gains_imp = gains_imp_par if out.mode is ControlMode.PARALLEL else gains_imp_full
                jac, jac_d = jacobian_and_dot(config.arm, ctrl.q_ref, ctrl.qdot_ref)
                if out.request_reanchor:
                    ee_ref = forward_kinematics(config.arm, ctrl.q_ref)
                err = pose_error(out.pose_ref, ee_ref)
                err_dot = out.twist_ref - jac @ ctrl.qdot_ref
                # Impedance side: action-convention wrench (see module doc).
                u_q = impedance_law(
                    jac, jac_d, ctrl.qdot_ref, split, gains_imp,
                    err, err_dot, out.accel_ref, -wrench_ctrl, jac_damping,
                )
                # The direct force loop runs on the unfiltered reading: its
                # rate term carries the only phase lead the loop has, and an
                # extra filter pole at the crossover rings it against a stiff
                # surface.  The raw noise it passes is small next to the
                # virtual-inertia amplification the filter exists to tame.
                e_f = force_error(wrench_fb[:3], out.force_ref)
                lam, ctrl.lambda_filter = lambda_dot(
                    split_par, e_f, ctrl.prev_force_error, dt_ctrl,
                    ctrl.lambda_filter, config.interaction.lambda_cutoff_hz,
                )
                ctrl.prev_force_error = e_f
                u_f = force_law(jac, split_par, gains_force, e_f, lam, jac_damping)
                ctrl.mode = out.mode
                parallel_step(config.arm, ctrl, u_q, u_f, dt_ctrl)

                # -- base-sway compensation ----------------------------------
                # The whole reference chain lives in the base frame, so any
                # residual sway of the base carries the tool with it and
                # modulates the contact force.  The joint servos are an order
                # of magnitude faster than the base dynamics, so the joint
                # command (not the law-side reference) absorbs the measured
                # deviation of the base from its hold pose.  The servos still
                # track with a group delay of 2*zeta/omega_n; leading the
                # position error by that lag times the base velocity keeps the
                # cancellation in phase at the sway frequency, which otherwise
                # rings against the force loop through a stiff contact.
                if out.landed:
                    dq_sway[:] = 0.0
                else:
                    sway = quat_rotate(
                        quat_conjugate(world.quat),
                        out.base_pos_ref - world.pos - servo_lag * world.vel,
                    )
                    dq_sway = damped_pinv(jac, jac_damping) @ np.concatenate(
                        [sway, np.zeros(3)]
                    )

                # -- battery compensation ------------------------------------
                battery_ref, _ = battery_setpoint(
                    config.carriage, float(world.arm_com_base()[0])
                )

                # -- flight control ------------------------------------------
                # Cancel the arm's measured contact load at the wrench level
                # (force plus its lever moment about the base), so holding a
                # contact force does not have to ride on the position
                # integrator.
                wrench_ff = -np.concatenate(
                    [wrench_fb[:3], cross3(ee_ref.position, wrench_fb[:3])]
                )
                wrench_des = cascade_wrench(
                    config.vehicle, config.flight_gains, flight_state,
                    out.base_pos_ref, out.base_vel_ref, att_ref,
                    world.pos, world.vel, world.quat, world.omega, dt_ctrl,
                    wrench_ff_body=wrench_ff,
                )
                rotor = allocate(config.vehicle, wrench_des)
                if out.landed:
                    rotor.thrusts[:] = 0.0
                commands = WorldCommands(
                    rotor=rotor,
                    q_ref=ctrl.q_ref + dq_sway,
                    battery_ref=battery_ref,
                    pump_active=out.pump_active,
                )
                result.control_ticks += 1
                phase_name = out.phase.value
                result.phase_durations[phase_name] = (
                    result.phase_durations.get(phase_name, 0.0) + dt_ctrl
                )

            if (writer is not None or telemetry_sink is not None) and step_i % k_tel == 0:
                record = {
                    "t": t,
                    "phase": out.phase.value,
                    "p": world.pos.tolist(),
                    "quat": world.quat.tolist(),
                    "v": world.vel.tolist(),
                    "w": world.omega.tolist(),
                    "p_ref": np.asarray(out.base_pos_ref, dtype=float).tolist(),
                    "q": world.q.tolist(),
                    "q_ref": ctrl.q_ref.tolist(),
                    "f_ext": wrench_base.tolist(),
                    "f_d": out.force_ref_scalar,
                    "f_fb": push,
                    "x_batt": world.battery_x,
                    "x_batt_ref": battery_ref,
                    "thrust": float(np.sum(rotor.thrusts)),
                    "tilt": np.asarray(rotor.tilts, dtype=float).tolist(),
                    "saturated": bool(rotor.saturated),
                    "contact": bool(world.contact.in_contact),
                    "vacuum": bool(world.contact.vacuum_on),
                }
                if pending_events:
                    record["events"] = pending_events
                    pending_events = []
                if pending_echo is not None:
                    record["echo"] = pending_echo
                    pending_echo = None
                if writer is not None:
                    writer.write_record(record)
                if telemetry_sink is not None:
                    telemetry_sink(record)

            world.step(commands)
            result.steps += 1

            if live and step_i % k_ctrl == k_ctrl - 1:
                ahead = world.t - (time.monotonic() - wall_start)
                if ahead > 0.0:
                    time.sleep(ahead)

            if out is not None and out.landed:
                result.landed = True
                break
    except SimulationDiverged as exc:
        result.diverged = True
        result.detail = str(exc)
    finally:
        if writer is not None:
            result.records = writer.records_written
            writer.close()
            tel_file.close()

    result.sim_time = world.t
    result.wall_time = time.monotonic() - wall_start
    result.readings = list(mission.readings)
    result.final_phase = mission.phase.value
    return result
