"""Scenario runner reproducing the structural results at desk scale."""

from .config import SCENARIOS, ScenarioConfig, load_config, parse_config
from .runner import RunReport, run_scenario

__all__ = ["SCENARIOS", "ScenarioConfig", "load_config", "parse_config", "RunReport",
           "run_scenario"]
