"""Ground-truth simulators and Monte Carlo estimators."""

from .kramers_moyal import KmEstimate, Z_999, ensemble_mean, km_batch, km_estimate, km_moments
from .schedule import ControlSchedule, logistic_control
from .sir import SirParams, SirSimulator, SirTrajectory, simulate_sir, two_group_params
from .voter import (
    VoterParams,
    VoterSimulator,
    gillespie_voter,
    kurtz_diffusion,
    kurtz_drift,
    simulate_counts,
)

__all__ = [
    "ControlSchedule",
    "KmEstimate",
    "SirParams",
    "SirSimulator",
    "SirTrajectory",
    "VoterParams",
    "VoterSimulator",
    "Z_999",
    "ensemble_mean",
    "gillespie_voter",
    "km_batch",
    "km_estimate",
    "km_moments",
    "kurtz_diffusion",
    "kurtz_drift",
    "logistic_control",
    "simulate_counts",
    "simulate_sir",
    "two_group_params",
]
