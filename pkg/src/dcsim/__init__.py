"""Transient-stability simulation of grids hosting large data centers."""

from .engine import SimLog, World, initialize, run, step
from .errors import (ConfigError, DcsimError, InitializationError, InstabilityError, ModelError,
                     SolverError, StalledMotorError)
from .scenario import Scenario, dump_scenario, load_scenario_text, parse_scenario
from .ups import Mode

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DcsimError", "InitializationError", "InstabilityError", "Mode",
    "ModelError", "Scenario", "SimLog", "SolverError", "StalledMotorError", "World",
    "dump_scenario", "initialize", "load_scenario_text", "parse_scenario", "run", "step",
]
