"""Experiments, validation oracles and the command line."""

from .experiments import ExperimentConfig, ExperimentResult, run_experiment
from .validation import (
    QuadratureReport,
    brute_force_prox,
    gaussian_integral_check,
    moment_diagnostics,
    wendel_check,
)
