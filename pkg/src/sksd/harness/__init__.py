"""Experiment configuration, orchestration, result files and the command-line interface."""
from .config import ConfigError, ExperimentConfig, TestConfig, build_family, load_config
from .io import emit_results, read_results
from .runner import aggregate, run_power_experiment, run_replicates, run_single_test, run_test

__all__ = [
    "ConfigError", "ExperimentConfig", "TestConfig", "build_family", "load_config",
    "emit_results", "read_results", "aggregate", "run_power_experiment", "run_replicates",
    "run_single_test", "run_test",
]
