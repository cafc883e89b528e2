"""Simulation kernel for interaction spaces."""

from .clocks import (ClockFunction, EventMergeWarning, TimeEventSet, arrival_from_ongoing, clock_eval,
                     events_between, validate_event_set)
from .core import (Interaction, Model, Space, StateVector, VectorInteraction, ZeroSet, build_model,
                   make_vector_interaction, roles_of)
from .engine import CausalTrace, EngineConfig, SimRun, Trajectory, run
from .errors import ISpaceError, ValidationError
from .runtime import ClockSpec, Distribution, Fixed, NormalGoods, Roles, RunData, RngStream

__version__ = "0.1.0"

__all__ = [
    "CausalTrace", "ClockFunction", "ClockSpec", "Distribution", "EngineConfig", "EventMergeWarning",
    "Fixed", "ISpaceError", "Interaction", "Model", "NormalGoods", "RngStream", "Roles", "RunData",
    "SimRun", "Space", "StateVector", "TimeEventSet", "Trajectory", "ValidationError",
    "VectorInteraction", "ZeroSet", "arrival_from_ongoing", "build_model", "clock_eval",
    "events_between", "make_vector_interaction", "roles_of", "run", "validate_event_set",
]
