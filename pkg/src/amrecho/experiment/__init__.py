"""Configuration, orchestration and the command-line surface."""

from .config import RunConfig, demo_config, from_dict, load_config, parse_config, validate
from .runner import RunResult, emit_results, run, sweep
from .scenario import Scenario, build_scenario

__all__ = [
    "RunConfig", "RunResult", "Scenario", "build_scenario", "demo_config", "emit_results",
    "from_dict", "load_config", "parse_config", "run", "sweep", "validate",
]
