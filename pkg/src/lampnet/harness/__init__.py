"""Scenario loading, experiment runs, sweeps, oracles and the CLI."""

from lampnet.harness.deadline import derive_deadline
from lampnet.harness.runner import FailureRecord, RunReport, run
from lampnet.harness.scenario import ScenarioConfig, ScenarioError, load_scenario, with_overrides
from lampnet.harness.sweep import sweep

__all__ = [
    "FailureRecord",
    "RunReport",
    "ScenarioConfig",
    "ScenarioError",
    "derive_deadline",
    "load_scenario",
    "run",
    "sweep",
    "with_overrides",
]
