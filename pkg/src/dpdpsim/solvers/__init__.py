"""Heuristic and exact solvers over frozen planning windows, plus the
baselines that act on the live state directly."""

from .anneal import SAParams, sa_solve
from .exact import ExactLimits, InstanceTooLargeError, exact_solve
from .genetic import GAParams, ga_solve
from .nearest import NearestPolicy, nearest_act
from .rolling import (
    DEFAULT_CONFIGS,
    RollingHorizonConfig,
    RollingHorizonPolicy,
    config_for,
)
from .window import (
    Plan,
    PlanStop,
    StaticInstance,
    WindowRequest,
    WindowVehicle,
    assignment_objective,
    assignment_plan,
    assignment_routes,
    build_static_window,
    empty_assignment,
    random_assignment,
    validate_plan,
)

__all__ = [
    "DEFAULT_CONFIGS",
    "ExactLimits",
    "GAParams",
    "InstanceTooLargeError",
    "NearestPolicy",
    "Plan",
    "PlanStop",
    "RollingHorizonConfig",
    "RollingHorizonPolicy",
    "SAParams",
    "StaticInstance",
    "WindowRequest",
    "WindowVehicle",
    "assignment_objective",
    "assignment_plan",
    "assignment_routes",
    "build_static_window",
    "config_for",
    "empty_assignment",
    "exact_solve",
    "ga_solve",
    "nearest_act",
    "random_assignment",
    "sa_solve",
    "validate_plan",
]
