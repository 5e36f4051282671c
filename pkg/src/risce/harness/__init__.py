"""Scenario configs, Monte Carlo sweeps and result files."""

from .config import PRESETS, ConfigError, ScenarioConfig, SweepVariable, load_config, preset_config
from .experiment import TrialResult, certify_designs, run_trial, sweep, trial_seed
from .output import CSV_HEADER, ResultRow, emit_csv, emit_plot_data, parse_csv

__all__ = [
    "CSV_HEADER",
    "ConfigError",
    "PRESETS",
    "ResultRow",
    "ScenarioConfig",
    "SweepVariable",
    "TrialResult",
    "certify_designs",
    "emit_csv",
    "emit_plot_data",
    "load_config",
    "parse_csv",
    "preset_config",
    "run_trial",
    "sweep",
    "trial_seed",
]
