"""Experiment runner, plots and self-checks."""
from .config import ExperimentConfig, config_from_dict, load_config
from .runner import RunResult, evaluate_success, read_csv, run_sweep, write_csv

__all__ = ["ExperimentConfig", "config_from_dict", "load_config", "RunResult", "evaluate_success",
           "read_csv", "run_sweep", "write_csv"]
