"""Scenario runner, CLI, analyses, and report rendering."""

from .analysis import SweepRow, attack_catalog_lines, replay_trace, sweep_redundancy_tension
from .config import ConfigError, ScenarioConfig, load_scenario, parse_scenario
from .runner import RunMetrics, run_scenario

__all__ = [
    "ConfigError",
    "RunMetrics",
    "ScenarioConfig",
    "SweepRow",
    "attack_catalog_lines",
    "load_scenario",
    "parse_scenario",
    "replay_trace",
    "run_scenario",
    "sweep_redundancy_tension",
]
