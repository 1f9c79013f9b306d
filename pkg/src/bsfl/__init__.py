"""Bandit client selection for federated learning with a generalization bonus."""
from .core import (
    ClientProfile,
    Energy,
    InvalidInput,
    SelectionHistory,
    SelectionSet,
    SystemParams,
    record_observation,
    record_round,
)
from .environment import Availability, Environment, LatencyLaw, Tier, random_laws, tiered_laws
from .generalization import GeneralizationSpec, g_of_rate, g_vector
from .optimizer import AnnealerConfig, ScoreTable, anneal, construct_path_to_optimum, solve_exhaustive
from .policies import BsflPolicy, GeniePolicy, RandomProportionalPolicy, RandomUniformPolicy
from .simulation import make_policy, run_bandit

__version__ = "0.1.0"

__all__ = [
    "AnnealerConfig", "Availability", "BsflPolicy", "ClientProfile", "Energy", "Environment",
    "GeneralizationSpec", "GeniePolicy", "InvalidInput", "LatencyLaw", "RandomProportionalPolicy",
    "RandomUniformPolicy", "ScoreTable", "SelectionHistory", "SelectionSet", "SystemParams", "Tier",
    "anneal", "construct_path_to_optimum", "g_of_rate", "g_vector", "make_policy", "random_laws",
    "record_observation", "record_round", "run_bandit", "solve_exhaustive", "tiered_laws",
]
