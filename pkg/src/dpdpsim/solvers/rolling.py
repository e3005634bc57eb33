"""Rolling-horizon replanning on top of the static window solvers.

The policy freezes the world every ``replan_interval`` slices, solves the
frozen window with SA, GA, or the exact search, and then feeds the cached
schedule back out slice by slice: pickups fire on their planned slice, and
vehicles leave for their next planned stop at the last possible moment.
Anything the cached schedule cannot express anymore (a vehicle that fell
behind, a request that appeared after freezing) degrades to defer or stay
until the next replan picks it up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import DEFER, JointAction, WorldState
from .anneal import SAParams, sa_solve
from .exact import ExactLimits, exact_solve
from .genetic import GAParams, ga_solve
from .window import Plan, build_static_window


@dataclass
class RollingHorizonConfig:
    horizon: int = 20
    replan_interval: int = 10

    def __post_init__(self):
        if self.horizon < 1 or self.replan_interval < 1:
            raise ValueError("horizon and replan interval must be positive")


# Tuned window sizes per scenario family.
DEFAULT_CONFIGS = {
    "synth-S": RollingHorizonConfig(20, 10),
    "synth-S-cost": RollingHorizonConfig(20, 10),
    "synth-L": RollingHorizonConfig(60, 30),
    "synth-L-cost": RollingHorizonConfig(60, 30),
    "synth-XL": RollingHorizonConfig(40, 20),
    "dhrd": RollingHorizonConfig(30, 15),
}


def config_for(scenario_name: str) -> RollingHorizonConfig:
    """Default window settings for a scenario, matched on its family name."""
    base = scenario_name.split("#", 1)[0]
    if base in DEFAULT_CONFIGS:
        return DEFAULT_CONFIGS[base]
    for key, cfg in DEFAULT_CONFIGS.items():
        if base.startswith(key):
            return cfg
    return RollingHorizonConfig()


@dataclass
class _CachedSchedule:
    anchor: int
    plan: Plan
    # global request id -> (vehicle, window slice of the planned pickup)
    pickups: dict[int, tuple[int, int]]
    # per vehicle: ordered (window slice, station) stops
    stops: list[list[tuple[int, int]]]


class RollingHorizonPolicy:
    """Replan at fixed intervals, emit cached-plan actions in between.

    ``solver`` is one of "sa", "ga", "exact".  The policy logs every
    degradation (planned action it could not execute) in ``self.events``.
    """

    def __init__(
        self,
        solver: str = "sa",
        config: RollingHorizonConfig | None = None,
        sa_params: SAParams | None = None,
        ga_params: GAParams | None = None,
        exact_limits: ExactLimits | None = None,
        seed: int = 0,
    ):
        if solver not in ("sa", "ga", "exact"):
            raise ValueError(f"unknown window solver {solver!r}")
        self.solver = solver
        self.config = config
        self.sa_params = sa_params
        self.ga_params = ga_params
        self.exact_limits = exact_limits
        self.rng = np.random.default_rng(seed)
        self.events: list[str] = []
        self._scenario = None
        self._cached: _CachedSchedule | None = None
        self._last_t = -1

    def __call__(self, state: WorldState, rng=None) -> JointAction:
        return self.act(state)

    def act(self, state: WorldState) -> JointAction:
        if state.scenario is not self._scenario:
            self._scenario = state.scenario
            self._cached = None
        cfg = self.config or config_for(state.scenario.name)
        cached = self._cached
        if (
            cached is None
            or state.t < self._last_t  # time rewound: a fresh episode
            or state.t - cached.anchor >= cfg.replan_interval
        ):
            cached = self._replan(state, cfg)
        self._last_t = state.t
        return self._translate(state, cached)

    def _replan(self, state: WorldState, cfg: RollingHorizonConfig) -> _CachedSchedule:
        instance = build_static_window(state, cfg.horizon)
        if self.solver == "sa":
            plan = sa_solve(instance, self.sa_params, self.rng)
        elif self.solver == "ga":
            plan = ga_solve(instance, self.ga_params, self.rng)
        else:
            plan = exact_solve(instance, self.exact_limits)

        pickups: dict[int, tuple[int, int]] = {}
        stops: list[list[tuple[int, int]]] = []
        for k, route in enumerate(plan.routes):
            stops.append([(s.time, s.station) for s in route])
            for s in route:
                for m in s.pickups:
                    pickups[instance.source_ids[m]] = (k, s.time)
        self._cached = _CachedSchedule(
            anchor=state.t, plan=plan, pickups=pickups, stops=stops
        )
        return self._cached

    def _translate(self, state: WorldState, cached: _CachedSchedule) -> JointAction:
        w = state.t - cached.anchor
        vehicles = state.vehicles
        space = [v.space for v in vehicles]
        decidable_vehicles = set(state.decidable_vehicles())

        request_actions: dict[int, int] = {}
        for m in sorted(state.decidable_requests()):
            request_actions[m] = DEFER
            sched = cached.pickups.get(m)
            if sched is None:
                continue  # appeared after the freeze, or left unserved
            k, pt = sched
            if pt > w:
                continue  # not yet
            req = state.scenario.requests[m]
            if (
                pt == w
                and k in decidable_vehicles
                and vehicles[k].station == req.origin
                and req.volume <= space[k]
            ):
                request_actions[m] = k
                space[k] -= req.volume
            else:
                self.events.append(
                    f"t={state.t} dropped pickup of request {m} on vehicle {k}"
                )

        vehicle_actions: dict[int, int] = {}
        for k in sorted(decidable_vehicles):
            here = vehicles[k].station
            vehicle_actions[k] = here
            target = next(
                ((wt, ws) for wt, ws in cached.stops[k] if wt > w), None
            )
            if target is None:
                continue
            wt, ws = target
            leg = state.scenario.graph.travel(here, ws)
            depart = wt - leg
            if w == depart:
                vehicle_actions[k] = ws
            elif w > depart:
                vehicle_actions[k] = ws
                self.events.append(
                    f"t={state.t} vehicle {k} late for stop at station {ws}"
                )
        return JointAction(
            request_actions=request_actions, vehicle_actions=vehicle_actions
        )
