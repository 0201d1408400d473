"""Noisy distributed QFT adder simulator with a secret-sharing extension."""

from .analytic import AnalyticParams, analytic_distribution, error_distribution, predicted_a
from .dqa import (
    CapacityError,
    DqaConfig,
    Histogram,
    OutcomeDistribution,
    fit_fidelity_param,
    run_exact,
    run_exact_factorized,
    run_exact_full,
    sample,
)
from .noise import NoiseModel
from .ntpa import NtpaConfig, run_ntpa, success_probability

__all__ = [
    "AnalyticParams",
    "CapacityError",
    "DqaConfig",
    "Histogram",
    "NoiseModel",
    "NtpaConfig",
    "OutcomeDistribution",
    "analytic_distribution",
    "error_distribution",
    "fit_fidelity_param",
    "predicted_a",
    "run_exact",
    "run_exact_factorized",
    "run_exact_full",
    "run_ntpa",
    "sample",
    "success_probability",
]
