"""Simulator, heuristic solvers, and benchmark tooling for multi-vehicle
dynamic pickup and delivery with requests that appear over time."""

from .core import (
    DEFER,
    JointAction,
    Request,
    RequestState,
    Scenario,
    StationGraph,
    Vehicle,
    VehicleSpec,
    WorldState,
    feasible_request_actions,
    feasible_vehicle_destinations,
    objective_value,
    shortest_path_closure,
    validate_scenario,
)
from .generate import (
    PRESETS,
    SyntheticSpec,
    generate_synthetic,
    import_request_log,
    load_scenario,
    save_scenario,
)
from .bench import BenchConfig, ResultRow, ResultTable, emit_table, run_benchmark
from .priors import (
    PriorConfig,
    PriorPolicy,
    destination_prior,
    greedy_prior_act,
    prior_act,
    vehicle_selection_prior,
)
from .sim import (
    ActionMasks,
    EpisodeSummary,
    Event,
    StepResult,
    action_masks,
    null_action,
    random_policy,
    reset,
    run_episode,
    step,
)

__all__ = [
    "DEFER",
    "ActionMasks",
    "BenchConfig",
    "EpisodeSummary",
    "Event",
    "JointAction",
    "PRESETS",
    "PriorConfig",
    "PriorPolicy",
    "Request",
    "RequestState",
    "ResultRow",
    "ResultTable",
    "Scenario",
    "StationGraph",
    "StepResult",
    "SyntheticSpec",
    "Vehicle",
    "VehicleSpec",
    "WorldState",
    "action_masks",
    "destination_prior",
    "emit_table",
    "feasible_request_actions",
    "feasible_vehicle_destinations",
    "generate_synthetic",
    "greedy_prior_act",
    "import_request_log",
    "load_scenario",
    "null_action",
    "objective_value",
    "prior_act",
    "random_policy",
    "reset",
    "run_benchmark",
    "run_episode",
    "save_scenario",
    "shortest_path_closure",
    "step",
    "validate_scenario",
    "vehicle_selection_prior",
]

__version__ = "0.1.0"
