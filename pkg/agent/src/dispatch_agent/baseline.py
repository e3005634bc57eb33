"""The informative priors as a standalone policy.

This is the no-network reference point: every decision is drawn from
(or argmaxed over) the same prior weights the policy network multiplies
into its decoded distribution.  Useful as a training baseline and as a
sanity check that the weight functions describe a playable strategy.
"""

from __future__ import annotations

import numpy as np

from .client import EnvClient
from .model import sample_index
from .obs import DEFER, EpisodeContext, Observation
from .priors import DEFAULT_PRIOR, PriorConfig, destination_weights, vehicle_choice_weights


def prior_joint_action(
    obs: Observation,
    ctx: EpisodeContext,
    config: PriorConfig = DEFAULT_PRIOR,
    rng: np.random.Generator | None = None,
    mode: str = "sample",
) -> tuple[dict[int, int], dict[int, int]]:
    """One joint action from the priors alone.

    Requests are decided in id order with capacity committed as it is
    consumed, then each free vehicle picks a destination; deliverable
    cargo includes pickups just assigned this slice.
    """
    if mode not in ("sample", "greedy"):
        raise ValueError(f"unknown decode mode {mode!r}")
    if mode == "sample" and rng is None:
        raise ValueError("sample mode needs an rng")
    n_vehicles = len(obs.vehicles)
    committed = [0] * n_vehicles
    onboard: list[set[int]] = [set() for _ in range(n_vehicles)]
    claimed: set[int] = set()
    request_actions: dict[int, int] = {}
    for m in obs.decidable_requests():
        req = obs.request_by_id(m)
        weights = vehicle_choice_weights(obs, req, config, committed)
        weights = weights * np.asarray(obs.request_masks[m], dtype=np.float64)
        if mode == "greedy":
            choice = int(np.argmax(weights))
        else:
            choice = sample_index(weights, rng)
        if choice == n_vehicles:
            request_actions[m] = DEFER
        else:
            request_actions[m] = choice
            committed[choice] += req.volume
            onboard[choice].add(m)
            claimed.add(m)
    vehicle_actions: dict[int, int] = {}
    for k in obs.decidable_vehicles():
        weights = destination_weights(obs, ctx, k, config, onboard[k], claimed)
        weights = weights * obs.vehicle_masks[k]
        if mode == "greedy":
            choice = int(np.argmax(weights))
        else:
            choice = sample_index(weights, rng)
        vehicle_actions[k] = choice
    return request_actions, vehicle_actions


def run_prior_episode(
    client: EnvClient,
    scenario,
    seed: int,
    rng: np.random.Generator | None = None,
    config: PriorConfig = DEFAULT_PRIOR,
    mode: str = "sample",
) -> tuple[float, float]:
    """Play one full episode with the priors; returns (objective, completion)."""
    ctx, obs = client.reset(scenario, seed)
    objective = 0.0
    while True:
        request_actions, vehicle_actions = prior_joint_action(obs, ctx, config, rng, mode)
        reply = client.step(request_actions, vehicle_actions)
        objective += reply.reward
        obs = reply.observation
        if reply.done:
            return objective, obs.completion_rate()
