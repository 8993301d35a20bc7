"""Experiment configuration, scenario runner, validation and CLI."""

from .config import ExperimentConfig, load_config, parse_config
from .validate import (
    Criterion,
    ValidationReport,
    compare_mc_density,
    ks_critical_value,
    run_experiment,
    sample_from_grid,
    with_seed,
)

__all__ = [
    "Criterion",
    "ExperimentConfig",
    "ValidationReport",
    "compare_mc_density",
    "ks_critical_value",
    "load_config",
    "parse_config",
    "run_experiment",
    "sample_from_grid",
    "with_seed",
]
