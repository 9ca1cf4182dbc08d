"""Command-line entry point.

Subcommands:

* ``run``          -- execute a scenario (bundled or from a config/script)
* ``replay-check`` -- compare two telemetry logs for divergence
* ``print-config`` -- emit a fully materialized configuration as YAML

Exit codes: 0 on success, 2 on configuration/usage errors, 3 when a
simulation diverges or a replay comparison fails.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, default_config, dump_config, load_config
from .mission import load_script
from .runner import run_scenario
from .scenarios import load_scenario, scenario_names
from .telemetry import replay_check

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uamsim",
        description="Aerial-manipulator contact-inspection simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario")
    run_p.add_argument("--scenario", choices=scenario_names(),
                       help="bundled scenario name")
    run_p.add_argument("--config", help="YAML configuration file")
    run_p.add_argument("--script", help="operator command script (JSONL)")
    run_p.add_argument("--output", help="telemetry output path (JSONL)")
    run_p.add_argument("--seed", type=int, help="override the RNG seed")
    run_p.add_argument("--duration", type=float, help="override duration [s]")
    run_p.add_argument("--live", action="store_true",
                       help="pace the loop to wall-clock time")
    run_p.add_argument("--bridge-port", type=int, default=None,
                       help="serve the live telemetry/command bridge on this port")
    run_p.add_argument("--quiet", action="store_true", help="suppress the summary")

    chk_p = sub.add_parser("replay-check", help="compare two telemetry logs")
    chk_p.add_argument("log_a")
    chk_p.add_argument("log_b")
    chk_p.add_argument("--tolerance", type=float, default=0.0,
                       help="numeric tolerance (default exact)")

    cfg_p = sub.add_parser("print-config", help="emit a materialized config")
    cfg_p.add_argument("--scenario", choices=scenario_names(),
                       help="apply a bundled scenario's overrides")
    cfg_p.add_argument("--config", help="start from this YAML file")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    base: dict = {}
    if args.config:
        base = load_config(args.config).to_dict()
    if args.scenario:
        config, script = load_scenario(args.scenario, base)
    else:
        from .config import ExperimentConfig

        config = ExperimentConfig.from_dict(base)
        script = []
    if args.script:
        try:
            with open(args.script, "r", encoding="utf-8") as fh:
                script = load_script(fh)
        except FileNotFoundError:
            print(f"error: script file not found: {args.script}", file=sys.stderr)
            return EXIT_CONFIG
        except ValueError as exc:
            print(f"error: bad command script: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    if args.seed is not None:
        config.seed = args.seed
    if args.duration is not None:
        config.duration = args.duration
    config.validate()

    bridge = None
    command_source = None
    telemetry_sink = None
    if args.bridge_port is not None:
        from .bridge import BridgeServer

        bridge = BridgeServer(port=args.bridge_port)
        bridge.start()
        command_source = bridge.poll_commands
        telemetry_sink = bridge.publish_telemetry

    try:
        result = run_scenario(
            config,
            script=script,
            telemetry_path=args.output,
            scenario_name=args.scenario or "",
            live=args.live or bridge is not None,
            command_source=command_source,
            telemetry_sink=telemetry_sink,
        )
    finally:
        if bridge is not None:
            bridge.stop()

    if not args.quiet:
        print(f"simulated {result.sim_time:.2f}s in {result.wall_time:.2f}s wall "
              f"({result.steps} steps, {result.control_ticks} control ticks)")
        print(f"final phase: {result.final_phase}; "
              f"thickness readings: {len(result.readings)}")
        for t, value in result.readings:
            print(f"  t={t:7.3f}s  thickness={value * 1e3:.4f} mm")
        if args.output:
            print(f"telemetry: {args.output} ({result.records} records)")
    if result.diverged:
        print(f"error: simulation diverged: {result.detail}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_replay_check(args: argparse.Namespace) -> int:
    try:
        report = replay_check(args.log_a, args.log_b, args.tolerance)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if report.equal:
        print(f"logs match ({report.lines_compared} lines)")
        return EXIT_OK
    print(f"logs diverge: {report.detail}", file=sys.stderr)
    return EXIT_DIVERGED


def _cmd_print_config(args: argparse.Namespace) -> int:
    base: dict = {}
    if args.config:
        base = load_config(args.config).to_dict()
    if args.scenario:
        config, _ = load_scenario(args.scenario, base)
    elif args.config:
        from .config import ExperimentConfig

        config = ExperimentConfig.from_dict(base)
    else:
        config = default_config()
    sys.stdout.write(dump_config(config))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "replay-check":
            return _cmd_replay_check(args)
        if args.command == "print-config":
            return _cmd_print_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
