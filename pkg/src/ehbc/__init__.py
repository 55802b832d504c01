"""Minimum-completion-time scheduling for a two-user energy-harvesting
AWGN broadcast channel."""
from .channel import ChannelParams, min_power, rate_stronger, rate_weaker
from .duopt import SolverConfig, initial_schedule, solve
from .model import ArrivalEvent, Instance, Schedule, check_feasibility
from .structure import is_wufbc, verify_structure

__all__ = [
    "ArrivalEvent", "ChannelParams", "Instance", "Schedule", "SolverConfig",
    "check_feasibility", "initial_schedule", "is_wufbc", "min_power", "rate_stronger",
    "rate_weaker", "solve", "verify_structure",
]
