"""Scenario language: parsing, running, and the bundled experiments."""
from .ast import Scenario
from .catalog import NAMES as BUNDLED, load, source
from .parser import Diagnostic, ScenarioError, format_scenario, parse
from .runner import RunResult, ScenarioRuntimeError, build_pipeline, check, run

__all__ = [
    "BUNDLED", "Diagnostic", "RunResult", "Scenario", "ScenarioError", "ScenarioRuntimeError",
    "build_pipeline", "check", "format_scenario", "load", "parse", "run", "source",
]
