"""Declarative scenarios, sweeps and their outputs."""

from .builtin import BUILTIN_NAMES, builtin
from .config import ConfigError, ScenarioConfig, SweepSpec, load, loads
from .output import emit_outputs
from .runner import ScenarioResult, SweepResult, run_scenario, run_sweep

__all__ = [
    "BUILTIN_NAMES",
    "ConfigError",
    "ScenarioConfig",
    "ScenarioResult",
    "SweepResult",
    "SweepSpec",
    "builtin",
    "emit_outputs",
    "load",
    "loads",
    "run_scenario",
    "run_sweep",
]
