"""Discrete-event simulation of the fork-join network and its synchronizer."""
from .engine import (
    BACKEND,
    SimOutput,
    available_backends,
    empirical_rate,
    extract_intervals,
    mean_sojourn,
    occupancy_distribution,
    run_simulation,
    simulate_from_times,
)

__all__ = [
    "BACKEND",
    "SimOutput",
    "available_backends",
    "empirical_rate",
    "extract_intervals",
    "mean_sojourn",
    "occupancy_distribution",
    "run_simulation",
    "simulate_from_times",
]
