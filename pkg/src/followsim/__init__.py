"""Deterministic person-following simulation stack."""
from .harness import aggregate, render_table, run_campaign, run_trial
from .results import TrialResult, classify_outcome
from .scenario import Scenario, default_scenario, load_scenario, load_scenario_file
from .stats import fisher_exact

__version__ = "0.1.0"

__all__ = [
    "Scenario",
    "TrialResult",
    "aggregate",
    "classify_outcome",
    "default_scenario",
    "fisher_exact",
    "load_scenario",
    "load_scenario_file",
    "render_table",
    "run_campaign",
    "run_trial",
]
