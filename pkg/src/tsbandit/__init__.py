"""Thompson Sampling for stochastic multi-armed bandits: simulation, bounds and checks."""

__version__ = "0.1.0"

from .bandit_core import ArmModel, BanditInstance, PosteriorState
from .policies import UCB1, ThompsonSampling, UniformRandom
from .simulator import BanditExperiment, DelayModel, RunConfig, run_monte_carlo, run_single

__all__ = [
    "ArmModel",
    "BanditInstance",
    "PosteriorState",
    "ThompsonSampling",
    "UCB1",
    "UniformRandom",
    "BanditExperiment",
    "DelayModel",
    "RunConfig",
    "run_single",
    "run_monte_carlo",
]
