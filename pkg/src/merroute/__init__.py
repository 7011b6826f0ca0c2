"""Routing of mobile energy resources with a linear mobility model."""

from .itinerary import Itinerary, Leg, Parking
from .milp import MilpModel, Solution, SolveConfig, solve
from .mobility import (
    PUBLISHED_COEFFICIENTS,
    TransitionCoefficients,
    build_mobility_block,
    check_coefficients,
    derive_transition_coefficients,
    validate_assignment,
)
from .restoration import build_restoration, decode_itineraries, objective_breakdown
from .scenario import Scenario, compute_travel_times, load_scenario

__version__ = "0.1.0"

__all__ = [
    "Itinerary",
    "Leg",
    "MilpModel",
    "PUBLISHED_COEFFICIENTS",
    "Parking",
    "Scenario",
    "Solution",
    "SolveConfig",
    "TransitionCoefficients",
    "build_mobility_block",
    "build_restoration",
    "check_coefficients",
    "compute_travel_times",
    "decode_itineraries",
    "derive_transition_coefficients",
    "load_scenario",
    "objective_breakdown",
    "solve",
    "validate_assignment",
]
