"""Desk-scale simulator and control stack for an omnidirectional
tilting-rotor aerial manipulator performing contact thickness
inspection.

The package splits into plant models (:mod:`uamsim.arm`,
:mod:`uamsim.flight`, :mod:`uamsim.world`), the interaction and mission
layers (:mod:`uamsim.interaction`, :mod:`uamsim.mission`), and the
experiment harness (:mod:`uamsim.config`, :mod:`uamsim.runner`,
:mod:`uamsim.telemetry`, :mod:`uamsim.scenarios`, :mod:`uamsim.bridge`,
:mod:`uamsim.cli`).
"""

from .config import ConfigError, ExperimentConfig, default_config, load_config
from .runner import RunResult, run_scenario
from .scenarios import load_scenario, scenario_names

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "default_config",
    "load_config",
    "RunResult",
    "run_scenario",
    "load_scenario",
    "scenario_names",
    "__version__",
]
