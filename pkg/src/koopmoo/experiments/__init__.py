"""Experiment pipelines, configuration and the verb runner."""

from .analytic import run_analytic_checks
from .config import EpidemicSettings, ExperimentConfig, Region, Validation, VoterSettings, default_config, load_config
from .epidemic import run_epidemic_moo
from .runner import VERBS, execute, resolve_config
from .voter import run_voter_moo

__all__ = [
    "EpidemicSettings",
    "ExperimentConfig",
    "Region",
    "VERBS",
    "Validation",
    "VoterSettings",
    "default_config",
    "execute",
    "load_config",
    "resolve_config",
    "run_analytic_checks",
    "run_epidemic_moo",
    "run_voter_moo",
]
