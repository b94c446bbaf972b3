"""Scenario files, orchestration, reports and the command line."""
from .config import CheckConfig, ConfigError, Scenario, parse_config, parse_config_text
from .emit import emit, load_json, render
from .runner import (ReportBundle, bochner_study, empirical_orders, fourier_decay_study, logistic_dt_study,
                     logistic_exact, logistic_value, refinement_study, run_scenario)

__all__ = [
    "CheckConfig", "ConfigError", "ReportBundle", "Scenario", "bochner_study", "emit", "empirical_orders",
    "fourier_decay_study", "load_json", "logistic_dt_study", "logistic_exact",
    "logistic_value", "parse_config", "parse_config_text",
    "refinement_study", "render", "run_scenario",
]
