"""Experiment configuration, rate studies, learner comparisons and the CLI."""

from .compare import CompareResult, rl_compare, rolling_mean
from .config import ExperimentConfig, load_config
from .functions import SUITE, get_function
from .rates import RateFit, eta_grid, fit_loglog, rate_experiment_eta, rate_experiment_N

__all__ = [
    "SUITE",
    "CompareResult",
    "ExperimentConfig",
    "RateFit",
    "eta_grid",
    "fit_loglog",
    "get_function",
    "load_config",
    "rate_experiment_N",
    "rate_experiment_eta",
    "rl_compare",
    "rolling_mean",
]
