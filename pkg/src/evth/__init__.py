"""Vacuum Einstein evolution in the time-harmonic transversal gauge with breakdown monitors."""

from ._jit import USE_NUMBA, set_threads_from_env
from .grid import GridSpec
from .state import MonitorReport, SliceState, init_gauge
from .oracles import KasnerParams, flat_state, kasner_state, perturbed_flat
from .evolution import EvolutionConfig, evolve, rhs, step_rk4
from .diagnostics import ThresholdConfig
from .domain import DomainSpec

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "SliceState",
    "MonitorReport",
    "init_gauge",
    "KasnerParams",
    "kasner_state",
    "flat_state",
    "perturbed_flat",
    "EvolutionConfig",
    "evolve",
    "rhs",
    "step_rk4",
    "ThresholdConfig",
    "DomainSpec",
    "USE_NUMBA",
    "set_threads_from_env",
]
