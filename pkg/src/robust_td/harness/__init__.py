"""Experiment harness: instance generation, configs, multi-trial runs and the CLI."""

from .config import ConfigError, ExperimentConfig, dump_config, load_config, parse_config
from .experiment import ExperimentResult, TrialRecord, run_experiment
from .instances import generate_instance

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "TrialRecord",
    "dump_config",
    "generate_instance",
    "load_config",
    "parse_config",
    "run_experiment",
]
