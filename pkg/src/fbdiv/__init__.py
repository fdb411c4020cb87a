"""Monte Carlo and analytic tools for the feedback-budget tradeoff in
MIMO broadcast channels: many users with coarse feedback versus few users
with fine feedback."""

from .analytic import bopt_bruteforce, bopt_stationary, rate_approx
from .schemes import ConfigError, SystemParams
from .simulator import ExperimentConfig, SimulationResult, empirical_bopt, run, sweep

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SimulationResult",
    "SystemParams",
    "bopt_bruteforce",
    "bopt_stationary",
    "empirical_bopt",
    "rate_approx",
    "run",
    "sweep",
]
