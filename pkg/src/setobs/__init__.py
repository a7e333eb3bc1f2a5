"""Adaptive set observers for LPV systems."""

from .model import LpvSystemSpec, ObserverGains, ThetaSchedule, TruthModel
from .scenarios import SCENARIOS, builtin_scenario
from .simulation import SimulationResult, simulate

__version__ = "0.1.0"

__all__ = ["LpvSystemSpec", "ObserverGains", "ThetaSchedule", "TruthModel", "SCENARIOS",
           "builtin_scenario", "SimulationResult", "simulate"]
