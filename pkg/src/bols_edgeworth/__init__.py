"""Edgeworth-expansion approximation of the batched-OLS test statistic in
two-arm batched bandit experiments, with a Monte-Carlo oracle and the
normal-approximation baseline."""

from .errors import (
    BracketError,
    ConfigError,
    DegenerateDesignError,
    DegenerateVarianceError,
    ExpansionDegenerateError,
    InfeasibleDesignError,
    ParameterDomainError,
)
from .noise import MomentSet, NoiseModel, sample, standardized_moments
from .policy import CountLaw, Policy, clamped_binomial, stage2_strategy
from .design import DesignConfig
from .edgeworth import ExpansionMeasure, expansion_density, hermite3, stage_covariance
from .backward import BackwardEngine, TailEstimate, tail_probability
from .simulation import mc_quantiles, simulate_trial, test_statistic
from .quantiles import QuantileResult, normal_quantile, quantile

__version__ = "0.1.0"

__all__ = [
    "BackwardEngine",
    "DesignConfig",
    "ExpansionMeasure",
    "QuantileResult",
    "TailEstimate",
    "expansion_density",
    "hermite3",
    "mc_quantiles",
    "normal_quantile",
    "quantile",
    "simulate_trial",
    "stage_covariance",
    "tail_probability",
    "test_statistic",
    "BracketError",
    "ConfigError",
    "CountLaw",
    "DegenerateDesignError",
    "DegenerateVarianceError",
    "ExpansionDegenerateError",
    "InfeasibleDesignError",
    "MomentSet",
    "NoiseModel",
    "ParameterDomainError",
    "Policy",
    "clamped_binomial",
    "sample",
    "stage2_strategy",
    "standardized_moments",
]
